#include <layergen/reaction.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace layergen;

namespace {

bool has_code(const Diagnostics& d, const std::string& code) {
    return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) { return x.code == code; });
}

} // namespace

TEST_CASE("cubic values") {
    const auto f = BistableReaction::cubic(0.3);
    CHECK(f.eval(0.3) == 0.0);
    CHECK(f.eval(0.0) == 0.0);
    CHECK(f.eval(1.0) == 0.0);
    CHECK(f.eval(0.5) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(f.eval(-0.1) == doctest::Approx(0.044).epsilon(1e-14));
    CHECK(f.eval(-0.1) > 0.0);

    oracle::Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
        const double u = rng.uniform(-2.0, 2.0);
        CHECK(f.eval(u) == doctest::Approx(oracle::cubic(0.3, u)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("mu is f'(a) and agrees with a central difference") {
    for (double a : {0.3, 0.5}) {
        const auto f = BistableReaction::cubic(a);
        const double h = 1e-6;
        const double fd = (oracle::cubic(a, a + h) - oracle::cubic(a, a - h)) / (2 * h);
        CHECK(f.mu() == doctest::Approx(a * (1 - a)).epsilon(1e-14));
        CHECK(f.mu() == doctest::Approx(fd).epsilon(1e-8));
        CHECK(f.mu() > 0.0);
    }
    CHECK(BistableReaction::cubic(0.3).mu() == doctest::Approx(0.21));
    CHECK(BistableReaction::cubic(0.5).mu() == doctest::Approx(0.25));
}

TEST_CASE("derivatives agree with central differences at random points") {
    oracle::Rng rng(7);
    for (int k = 0; k < 1000; ++k) {
        const double a = rng.uniform(0.05, 0.95);
        const auto f = BistableReaction::cubic(a);
        const double u = rng.uniform(-2.0, 2.0);
        const double h = 1e-5;
        const double d1 = (f.eval(u + h) - f.eval(u - h)) / (2 * h);
        const double d2 = (f.derivative(u + h) - f.derivative(u - h)) / (2 * h);
        const double s1 = std::max(1.0, std::abs(d1));
        const double s2 = std::max(1.0, std::abs(d2));
        CHECK(std::abs(f.derivative(u) - d1) / s1 < 1e-6);
        CHECK(std::abs(f.second_derivative(u) - d2) / s2 < 1e-6);
    }
}

TEST_CASE("max_abs_derivative bounds sampled slopes") {
    const auto f = BistableReaction::cubic(0.3);
    const double bound = f.max_abs_derivative(0.0, 1.0);
    double sampled = 0.0;
    for (int i = 0; i <= 10000; ++i) sampled = std::max(sampled, std::abs(f.derivative(i / 10000.0)));
    CHECK(bound >= sampled);
    CHECK(bound == doctest::Approx(sampled).epsilon(1e-6));
}

TEST_CASE("validate_bistable") {
    CHECK(validate_bistable(BistableReaction::cubic(0.3)).empty());
    CHECK(validate_bistable(BistableReaction::cubic(0.5)).empty());

    const auto degenerate = validate_bistable(BistableReaction::cubic(0.0));
    CHECK_FALSE(degenerate.empty());
    CHECK(has_code(degenerate, "unstable-zero-range"));

    // u(1-u)(a-u): same zeros, reversed signs
    const auto flipped = validate_bistable(BistableReaction::from_factors(+1.0, {0.0, 0.3, 1.0}, 0.3));
    CHECK(has_code(flipped, "sign-pattern"));
    CHECK(has_code(flipped, "slope-sign"));

    const auto shifted = validate_bistable(BistableReaction::from_factors(-1.0, {0.0, 0.3, 1.1}, 0.3));
    CHECK(has_code(shifted, "zero-mismatch"));
}

TEST_CASE("perturb") {
    const auto f = BistableReaction::cubic(0.3);

    SUBCASE("zero perturbation is the identity") {
        const auto p = perturb(f, 0.0);
        CHECK(p.a_delta == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(p.mu_delta == doctest::Approx(0.21).epsilon(1e-10));
    }

    SUBCASE("small perturbation against bisection") {
        const auto p = perturb(f, 0.01);
        const double ref = oracle::bisect([](double u) { return oracle::cubic(0.3, u) + 0.01; }, 0.1, 0.5);
        CHECK(std::abs(p.a_delta - ref) < 1e-12);
        CHECK(p.a_delta == doctest::Approx(0.246102).epsilon(1e-5));
        CHECK(std::abs(f.eval(p.a_delta) + 0.01) < 1e-12);
        CHECK(p.mu_delta == doctest::Approx(f.derivative(p.a_delta)));
        CHECK(p.mu_delta > 0.0);
        // the first order estimate a - delta / mu = 0.2524 is off by O(delta^2)
        CHECK(std::abs(p.a_delta - (0.3 - 0.01 / 0.21)) < 0.01);
        CHECK(std::abs(perturb(f, 1e-4).a_delta - (0.3 - 1e-4 / 0.21)) < 1e-6);

        const auto g = p.reaction();
        CHECK(g.a() == p.a_delta);
        CHECK(std::abs(g.eval(p.a_delta)) < 1e-12);
        CHECK(std::abs(g.eval(p.lower_zero)) < 1e-10);
        CHECK(std::abs(g.eval(p.upper_zero)) < 1e-10);
        CHECK(p.lower_zero < p.a_delta);
        CHECK(p.a_delta < p.upper_zero);
    }

    SUBCASE("large perturbation loses the unstable zero") {
        CHECK_THROWS_AS(perturb(f, 1.0), ReactionError);
    }

    SUBCASE("a(delta) decreases on the validated range") {
        const auto [lo, hi] = valid_delta_range(f);
        CHECK(lo < 0.0);
        CHECK(hi > 0.0);
        double prev = perturb(f, 0.9 * lo).a_delta;
        for (int k = 1; k <= 50; ++k) {
            const double d = 0.9 * lo + (0.9 * hi - 0.9 * lo) * k / 50.0;
            const double cur = perturb(f, d).a_delta;
            CHECK(cur < prev);
            prev = cur;
        }
    }

    SUBCASE("range endpoints agree with a cubic discriminant oracle") {
        // f + delta has three real zeros while -delta lies between the local
        // minimum and maximum of f.
        const double a = 0.3;
        const double disc = std::sqrt((1 + a) * (1 + a) - 3 * a);
        const double umin = ((1 + a) - disc) / 3.0, umax = ((1 + a) + disc) / 3.0;
        const auto [lo, hi] = valid_delta_range(f);
        CHECK(lo == doctest::Approx(-oracle::cubic(a, umax)).epsilon(1e-6));
        CHECK(hi == doctest::Approx(-oracle::cubic(a, umin)).epsilon(1e-6));
    }
}
