#include <layergen/reaction.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace layergen {

BistableReaction BistableReaction::cubic(double a) {
    return BistableReaction(-1.0, {0.0, a, 1.0}, a, 0.0);
}

BistableReaction BistableReaction::from_factors(double scale, std::array<double, 3> roots,
                                                double a, double offset) {
    return BistableReaction(scale, roots, a, offset);
}

double BistableReaction::max_abs_derivative(double lo, double hi) const {
    double m = std::max(std::abs(derivative(lo)), std::abs(derivative(hi)));
    // vertex of the quadratic f'
    const double vertex = (roots_[0] + roots_[1] + roots_[2]) / 3.0;
    if (vertex > lo && vertex < hi) m = std::max(m, std::abs(derivative(vertex)));
    return m;
}

double BistableReaction::largest_zero() const {
    const double top = std::max({roots_[0], roots_[1], roots_[2]});
    if (offset_ == 0.0) return top;
    // beyond the top root f is monotone with sign(-scale) for large u
    double lo = top, hi = top + 1.0;
    auto sgn = [&](double u) { return std::signbit(eval(u)); };
    while (sgn(hi) == sgn(lo) && hi - top < 1e6) hi = top + 2.0 * (hi - top);
    if (sgn(hi) == sgn(lo)) return top;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sgn(mid) == sgn(lo)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Diagnostics validate_bistable(const BistableReaction& r, std::size_t samples) {
    Diagnostics out;
    const double a = r.a();
    if (!(a > 0.0 && a < 1.0)) {
        out.push_back({"unstable-zero-range", "a = " + std::to_string(a) + " is not in (0,1)"});
    }

    constexpr double zero_tol = 1e-14;
    for (double z : {0.0, a, 1.0}) {
        if (std::abs(r.eval(z)) > zero_tol) {
            out.push_back({"zero-mismatch", "f(" + std::to_string(z) + ") = " +
                                                std::to_string(r.eval(z))});
        }
    }

    if (!(r.derivative(0.0) < 0.0))
        out.push_back({"slope-sign", "f'(0) must be negative"});
    if (!(r.derivative(a) > 0.0))
        out.push_back({"slope-sign", "f'(a) must be positive"});
    if (!(r.derivative(1.0) < 0.0))
        out.push_back({"slope-sign", "f'(1) must be negative"});

    // f > 0 on (-inf,0) u (a,1), f < 0 on (0,a) u (1,inf)
    std::size_t bad = 0;
    double first_bad = 0.0;
    constexpr double skip = 1e-9;
    for (std::size_t i = 0; i < samples; ++i) {
        const double u = -2.0 + 4.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        if (std::abs(u) < skip || std::abs(u - a) < skip || std::abs(u - 1.0) < skip) continue;
        const bool want_positive = (u < 0.0) || (u > a && u < 1.0);
        const double v = r.eval(u);
        const bool ok = want_positive ? v > 0.0 : v < 0.0;
        if (!ok) {
            if (bad == 0) first_bad = u;
            ++bad;
        }
    }
    if (bad > 0) {
        out.push_back({"sign-pattern", std::to_string(bad) + " of " + std::to_string(samples) +
                                           " samples have the wrong sign, first at u = " +
                                           std::to_string(first_bad)});
    }
    return out;
}

namespace {

struct Bracket {
    double lo;
    double hi;
};

// Sign-change brackets of f + delta on [-1, 2].
std::vector<Bracket> bracket_zeros(const BistableReaction& r, double delta) {
    constexpr int n = 6000;
    constexpr double lo = -1.0, hi = 2.0;
    std::vector<Bracket> out;
    auto g = [&](double u) { return r.eval(u) + delta; };
    double x_prev = lo;
    double g_prev = g(x_prev);
    if (g_prev == 0.0) out.push_back({x_prev, x_prev});
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double gx = g(x);
        if (gx == 0.0) {
            out.push_back({x, x});
        } else if (g_prev != 0.0 && std::signbit(gx) != std::signbit(g_prev)) {
            out.push_back({x_prev, x});
        }
        x_prev = x;
        g_prev = gx;
    }
    return out;
}

double bisect(const BistableReaction& r, double delta, Bracket b) {
    auto g = [&](double u) { return r.eval(u) + delta; };
    double lo = b.lo, hi = b.hi;
    const bool lo_negative = g(lo) < 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == lo_negative) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Newton from x0, kept inside the bracket; bisection whenever Newton leaves it.
double safeguarded_newton(const BistableReaction& r, double delta, Bracket b, double x0) {
    auto g = [&](double u) { return r.eval(u) + delta; };
    double lo = b.lo, hi = b.hi;
    if (lo == hi) return lo;
    const bool lo_negative = g(lo) < 0.0;
    double x = std::clamp(x0, lo, hi);
    constexpr double tol = 1e-12;
    for (int it = 0; it < 200; ++it) {
        const double gx = g(x);
        if (gx == 0.0) return x;
        if ((gx < 0.0) == lo_negative) lo = x; else hi = x;
        const double slope = r.derivative(x);
        double next = slope != 0.0 ? x - gx / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < tol) return next;
        x = next;
    }
    return x;
}

} // namespace

BistableReaction PerturbedReaction::reaction() const {
    return BistableReaction::from_factors(base.scale(), base.roots(), a_delta, base.offset() + delta);
}

PerturbedReaction perturb(const BistableReaction& r, double delta) {
    const auto brackets = bracket_zeros(r, delta);
    if (brackets.size() != 3) {
        throw ReactionError("f + delta has " + std::to_string(brackets.size()) +
                            " zeros on [-1,2] for delta = " + std::to_string(delta) +
                            "; the bistable structure is lost");
    }
    PerturbedReaction p{r, delta, 0.0, 0.0, 0.0, 0.0};
    p.a_delta = safeguarded_newton(r, delta, brackets[1], r.a());
    p.lower_zero = bisect(r, delta, brackets[0]);
    p.upper_zero = bisect(r, delta, brackets[2]);
    p.mu_delta = r.derivative(p.a_delta);
    if (!(p.mu_delta > 0.0)) {
        throw ReactionError("f'(a_delta) is not positive for delta = " + std::to_string(delta));
    }
    return p;
}

std::pair<double, double> valid_delta_range(const BistableReaction& r) {
    auto ok = [&](double d) {
        try {
            perturb(r, d);
            return true;
        } catch (const ReactionError&) {
            return false;
        }
    };
    auto edge = [&](double sign) {
        double inside = 0.0, outside = sign;
        while (ok(outside) && std::abs(outside) < 1e6) outside *= 2.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (ok(mid)) inside = mid; else outside = mid;
        }
        return inside;
    };
    if (!ok(0.0)) return {0.0, 0.0};
    return {edge(-1.0), edge(1.0)};
}

} // namespace layergen
