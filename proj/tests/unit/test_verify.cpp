#include <layergen/verify.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace layergen;

namespace {

const BistableReaction f = BistableReaction::cubic(0.3);
const double mu = 0.21;

// Smooth layer 1 -> 0 centred at r0 with thickness parameter s.
Field tanh_layer(const RadialGrid& g, double r0, double s) {
    Field u{std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = 0.5 * (1.0 - std::tanh((g.centers[i] - r0) / s));
    return u;
}

struct SmallRun {
    RadialGrid grid{2, 1.0, 512};
    InitialProfile profile;
    double eps = 0.05;
    Field u0;
    std::vector<Snapshot> snaps;

    SmallRun() {
        u0 = build_u0(grid, profile, 0.3);
        SolverConfig c;
        c.eps = eps;
        const double te = generation_time(mu, eps);
        c.t_end = te;
        for (int k = 0; k <= 10; ++k) c.snapshot_times.push_back(te * k / 10.0);
        snaps = run(c, &f, grid, u0);
    }
};

const SmallRun& small_run() {
    static const SmallRun r;
    return r;
}

} // namespace

TEST_CASE("parameters") {
    VerifyParams vp;
    CHECK_NOTHROW(vp.validate(0.3));
    vp.gamma = 0.3;
    CHECK_THROWS_AS(vp.validate(0.3), VerifyError);
    vp = {};
    vp.sandwich_tol = -1.0;
    CHECK_THROWS_AS(vp.validate(0.3), VerifyError);
    vp = {};
    vp.M0_rungs = 0;
    CHECK_THROWS_AS(vp.validate(0.3), VerifyError);
}

TEST_CASE("width of synthetic profiles") {
    const RadialGrid g(2, 1.0, 2048);

    SUBCASE("linear ramp") {
        for (double s : {0.01, 0.05, 0.1}) {
            Field u{std::vector<double>(g.size())};
            const double r0 = 0.3;
            for (std::size_t i = 0; i < g.size(); ++i) {
                u[i] = std::clamp((r0 + s - g.centers[i]) / (2 * s), 0.0, 1.0);
            }
            CHECK(measure_width(u, g, 0.1) == doctest::Approx(1.6 * s).epsilon(1e-9));
        }
    }

    SUBCASE("step") {
        Field u{std::vector<double>(g.size())};
        for (std::size_t i = 0; i < g.size(); ++i) u[i] = g.centers[i] < 0.3 ? 1.0 : 0.0;
        CHECK(measure_width(u, g, 0.1) <= g.dr);
    }

    SUBCASE("tanh layer, against the closed form and under refinement") {
        // 0.5 (1 - tanh(z)) = eta at z = atanh(1 - 2 eta)
        const double s = 0.01;
        const double exact = 2.0 * s * std::atanh(0.8);
        const double w1 = measure_width(tanh_layer(g, 0.3, s), g, 0.1);
        const RadialGrid g2(2, 1.0, 4096);
        const double w2 = measure_width(tanh_layer(g2, 0.3, s), g2, 0.1);
        CHECK(std::abs(w1 - exact) < 2 * g.dr);
        CHECK(std::abs(w1 - w2) < 2 * g.dr);
    }

    SUBCASE("missing layer") {
        const Field flat{std::vector<double>(g.size(), 0.5)};
        CHECK_THROWS_AS(measure_width(flat, g, 0.1), VerifyError);
        const Field ones{std::vector<double>(g.size(), 1.0)};
        CHECK_THROWS_AS(measure_width(ones, g, 0.1), VerifyError);
    }

    SUBCASE("box rays agree with the radial measure") {
        const CartesianGrid2D box(1.0, 1.0, 400, 400);
        Field u{std::vector<double>(box.size())};
        for (std::size_t j = 0; j < box.Ny; ++j) {
            for (std::size_t i = 0; i < box.Nx; ++i) {
                const double r = std::hypot(box.x(i) - 0.5, box.y(j) - 0.5);
                u[box.index(i, j)] = 0.5 * (1.0 - std::tanh((r - 0.25) / 0.02));
            }
        }
        CHECK(measure_width(u, box, {0.5, 0.5}, 0.1) == doctest::Approx(0.04 * std::atanh(0.8)).epsilon(0.02));
    }
}

TEST_CASE("bands and the M0 ladder") {
    const RadialGrid g(2, 1.0, 1024);
    const InitialProfile p;
    const Field u0 = build_u0(g, p, 0.3);
    const double r0 = gamma0_locate(p, f);
    const double eps = 0.01;
    const Field u = tanh_layer(g, r0, 0.02);
    VerifyParams vp;

    const auto res = classify_bands(u, u0, 0.3, eps, vp);
    CHECK(res.bounds_ok);
    REQUIRE(res.M0.has_value());
    CHECK(*res.M0 > res.M0_needed);
    CHECK(*res.M0 - res.M0_needed <= vp.M0_step + 1e-12);
    CHECK(bands_hold(u, u0, 0.3, eps, vp.gamma, *res.M0));
    if (*res.M0 > vp.M0_step) CHECK_FALSE(bands_hold(u, u0, 0.3, eps, vp.gamma, *res.M0 - vp.M0_step - 1e-9));

    // outside the support u0 = 0 needs u <= gamma
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (u0[i] == 0.0) CHECK(u[i] <= vp.gamma);
    }

    // larger gamma never needs a larger M0
    double prev = 1e300;
    for (double gamma : {0.02, 0.05, 0.1, 0.2, 0.29}) {
        VerifyParams q;
        q.gamma = gamma;
        const double m = *classify_bands(u, u0, 0.3, eps, q).M0;
        CHECK(m <= prev);
        prev = m;
    }

    Field over = u;
    over[0] = 1.5;
    CHECK_FALSE(classify_bands(over, u0, 0.3, eps, vp).bounds_ok);
}

TEST_CASE("three-region statement") {
    const RadialGrid g(2, 1.0, 1024);
    const double r0 = 0.264043, eps = 0.01;
    const auto d = signed_distances(g, r0);
    const Field u = tanh_layer(g, r0, 0.02);
    VerifyParams vp;
    const auto C = fit_thickness_constant(u, d, eps, vp);
    REQUIRE(C.has_value());
    // the layer leaves [eta, 1 - eta] at |r - r0| = 0.02 atanh(0.8)
    const double expected = 0.02 * std::atanh(0.8) / eps;
    CHECK(*C >= expected - g.dr / eps);
    CHECK(*C <= expected + g.dr / eps + vp.C_step);
    CHECK(three_band_holds(u, d, eps, vp.eta, *C));
    CHECK_FALSE(three_band_holds(u, d, eps, vp.eta, *C - 2 * g.dr / eps - vp.C_step));

    Field bad = u;
    bad[5] = -0.1;
    CHECK_FALSE(fit_thickness_constant(bad, d, eps, vp).has_value());
}

TEST_CASE("optimality scan on a synthetic family") {
    // layers that sharpen linearly in time; they satisfy both statements from
    // a known time on
    const RadialGrid g(2, 1.0, 1024);
    const InitialProfile p;
    const Field u0 = build_u0(g, p, 0.3);
    const double r0 = gamma0_locate(p, f), eps = 0.01;
    const GenerationClock clock(mu, eps);
    std::vector<Snapshot> snaps;
    for (int k = 0; k <= 40; ++k) {
        const double t = clock.t_eps * k / 40.0;
        snaps.push_back({t, tanh_layer(g, r0, 0.2 - 0.18 * t / clock.t_eps)});
    }
    VerifyParams vp;
    const auto bands = classify_bands(snaps.back().field, u0, 0.3, eps, vp);
    const auto C = fit_thickness_constant(snaps.back().field, signed_distances(g, r0), eps, vp);
    REQUIRE(bands.M0);
    REQUIRE(C);
    const auto res = optimality_scan(snaps, g, u0, r0, 0.3, eps, mu, *bands.M0, *C, clock.at_b(3.0), vp);
    REQUIRE(res.t_min.has_value());
    CHECK(*res.t_min <= clock.t_eps);
    CHECK(*res.b_fit >= 0.0);
    CHECK(*res.b_fit == doctest::Approx(std::abs(std::log(eps)) - mu * *res.t_min / (eps * eps)));
    CHECK(clock.at_b(*res.b_fit) == doctest::Approx(*res.t_min));

    // brute force: the earliest snapshot satisfying both statements
    const auto d = signed_distances(g, r0);
    double first = -1.0;
    for (const auto& s : snaps) {
        if (bands_hold(s.field, u0, 0.3, eps, vp.gamma, *bands.M0) && three_band_holds(s.field, d, eps, vp.eta, *C)) {
            first = s.t;
            break;
        }
    }
    CHECK(*res.t_min == first);

    // the probe reads the profile at r0 - C eps on the snapshot nearest the probe time
    const Snapshot* near = &snaps[0];
    for (const auto& s : snaps) {
        if (std::abs(s.t - clock.at_b(3.0)) < std::abs(near->t - clock.at_b(3.0))) near = &s;
    }
    CHECK(res.probe_t == near->t);
    CHECK(res.probe_u == doctest::Approx(sample_radial(near->field, g, r0 - *C * eps)));
    CHECK(res.probe_below == (res.probe_u < 0.9));
}

TEST_CASE("interpolation helpers") {
    const RadialGrid g(2, 1.0, 64);
    Field u{std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = 3.0 * g.centers[i] + 1.0;
    oracle::Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        const double r = rng.uniform(g.centers.front(), g.centers.back());
        CHECK(sample_radial(u, g, r) == doctest::Approx(3.0 * r + 1.0).epsilon(1e-12));
    }
    CHECK(sample_radial(u, g, 0.0) == u[0]);

    const CartesianGrid2D box(1.0, 1.0, 32, 32);
    Field v{std::vector<double>(box.size())};
    for (std::size_t j = 0; j < box.Ny; ++j) {
        for (std::size_t i = 0; i < box.Nx; ++i) v[box.index(i, j)] = 2.0 * box.x(i) - box.y(j) + 0.5;
    }
    for (int k = 0; k < 100; ++k) {
        const Point2 x{rng.uniform(box.x(0), box.x(31)), rng.uniform(box.y(0), box.y(31))};
        CHECK(sample_bilinear(v, box, x) == doctest::Approx(2.0 * x[0] - x[1] + 0.5).epsilon(1e-12));
    }
}

TEST_CASE("sandwich") {
    const auto& run = small_run();
    const double eps = run.eps;
    EnvelopeParams tmpl{eps, 1.0, mu, 2};
    const auto cal = calibrate_Cstar(tmpl, run.profile, f, KernelConfig{});
    const Envelope env(cal.params, run.profile, f, cal.kernel);

    const auto at0 = sandwich_check(std::span(run.snaps).first(1), run.grid, env, 0.0);
    CHECK(at0.violations == 0);
    CHECK(at0.worst_margin == 0.0);

    const auto all = sandwich_check(run.snaps, run.grid, env, 5e-3);
    CHECK(all.violations == 0);
    CHECK(all.snapshots == run.snaps.size());
    CHECK(all.checked == run.snaps.size() * run.grid.size());

    EnvelopeParams bare = cal.params;
    bare.Cstar = 0.0;
    const Envelope flat(bare, run.profile, f, cal.kernel);
    const auto crossed = sandwich_check(run.snaps, run.grid, flat, 0.0);
    CHECK(crossed.violations > 0);
    CHECK(crossed.worst_margin < 0.0);
}

TEST_CASE("weak residual") {
    const auto& run = small_run();
    const auto tests = radial_test_functions(run.grid);
    REQUIRE(tests.size() == 3);
    CHECK(tests[0].name == "one");

    SUBCASE("test functions have the stated Laplacian") {
        for (const auto& tf : tests) {
            for (std::size_t i = 1; i + 1 < run.grid.size(); ++i) {
                const double h = run.grid.dr, r = run.grid.centers[i];
                const double fd = (tf.phi[i + 1] - 2 * tf.phi[i] + tf.phi[i - 1]) / (h * h) +
                                  (tf.phi[i + 1] - tf.phi[i - 1]) / (2 * h * r);
                CHECK(fd == doctest::Approx(tf.laplacian[i]).epsilon(1e-4).scale(1.0));
            }
            // zero slope at r = R
            const std::size_t n = run.grid.size();
            CHECK(std::abs(tf.phi[n - 1] - tf.phi[n - 2]) < 1e-4);
        }
        const CartesianGrid2D box(1.0, 1.0, 32, 32);
        const auto bt = box_test_functions(box);
        CHECK(bt.size() == 4);
        CHECK(bt[0].name == "one");
    }

    SUBCASE("zero solution") {
        std::vector<Snapshot> zero;
        for (int k = 0; k < 5; ++k) zero.push_back({0.01 * k, Field{std::vector<double>(run.grid.size(), 0.0)}});
        for (double r : weak_residual(zero, run.grid, tests, &f, 2, 0.05)) CHECK(r == 0.0);
    }

    SUBCASE("streaming accumulation is small on the solver's own steps") {
        SolverConfig c;
        c.eps = run.eps;
        c.t_end = generation_time(mu, run.eps);
        WeakResidualAccumulator acc(run.grid.volumes, tests, &f, 2, run.eps);
        layergen::run(c, &f, run.grid, run.u0, [&](double t, const Field& u) { acc.add(t, u); });
        const auto r = acc.residuals();
        const double mass = integral(run.grid, run.u0);
        for (double v : r) CHECK(v < 1e-3 * mass);
        CHECK_THROWS_AS(acc.add(0.0, run.u0), VerifyError);
    }

    SUBCASE("residual decreases as h and dt halve together") {
        const double te = generation_time(mu, run.eps);
        std::vector<std::vector<double>> res;
        std::vector<double> hs;
        const RadialGrid finest(2, 1.0, 256);
        SolverConfig c;
        c.eps = run.eps;
        c.t_end = te;
        const double kappa = cfl_dt(c, finest, Field{std::vector<double>(finest.size(), 1.0)}) / finest.dr;
        for (std::size_t n : {64, 128, 256}) {
            const RadialGrid g(2, 1.0, n);
            c.max_dt = kappa * g.dr;
            WeakResidualAccumulator acc(g.volumes, radial_test_functions(g), &f, 2, run.eps);
            layergen::run(c, &f, g, build_u0(g, run.profile, 0.3), [&](double t, const Field& u) { acc.add(t, u); });
            res.push_back(acc.residuals());
            hs.push_back(g.dr);
        }
        for (std::size_t k = 0; k < 3; ++k) {
            const double o1 = std::log2(res[0][k] / res[1][k]);
            const double o2 = std::log2(res[1][k] / res[2][k]);
            MESSAGE("test function " << k << " orders " << o1 << " " << o2);
            CHECK(o1 >= 1.0);
            CHECK(o2 >= 1.0);
        }
    }
}

TEST_CASE("convergence helpers") {
    const std::vector<double> err{1.0, 0.25, 0.0625};
    const std::vector<double> ref{1.0, 2.0, 4.0};
    const auto o = convergence_orders(err, ref);
    REQUIRE(o.size() == 2);
    CHECK(o[0] == doctest::Approx(2.0));
    CHECK(o[1] == doctest::Approx(2.0));

    const RadialGrid fine(2, 1.0, 256), coarse(2, 1.0, 64);
    const Field u = build_u0(fine, InitialProfile{}, 0.3);
    const Field r = restrict_radial(u, fine, coarse);
    CHECK(integral(coarse, r) == doctest::Approx(integral(fine, u)).epsilon(1e-13));
    CHECK_THROWS_AS(restrict_radial(u, fine, RadialGrid(2, 1.0, 100)), VerifyError);

    const CartesianGrid2D bf(1.0, 1.0, 64, 64), bc(1.0, 1.0, 32, 32);
    Field b{std::vector<double>(bf.size())};
    oracle::Rng rng(8);
    for (double& v : b.values) v = rng.uniform();
    CHECK(integral(bc, restrict_box(b, bf, bc)) == doctest::Approx(integral(bf, b)).epsilon(1e-13));

    CHECK(linf_distance(Field{{1.0, 2.0}}, Field{{1.5, 1.0}}) == 1.0);
    CHECK(l1_distance(coarse, r, r) == 0.0);
}

TEST_CASE("self-convergence of the full solver") {
    RadialProblem p;
    p.solver.eps = 0.02;
    const double te = generation_time(mu, 0.02);
    p.solver.t_end = te;
    const std::vector<std::size_t> ladder{128, 256, 512};
    const auto res = convergence_study(p, ladder, 1024, te);
    REQUIRE(res.orders.size() == 2);
    MESSAGE("full solver orders " << res.orders[0] << " " << res.orders[1]);
    CHECK(res.monotone);
    for (double o : res.orders) CHECK(o >= 1.0);

    RadialProblem d = p;
    d.with_reaction = false;
    const auto dres = convergence_study(d, ladder, 1024, te);
    MESSAGE("diffusion-only orders " << dres.orders[0] << " " << dres.orders[1]);
    for (double o : dres.orders) CHECK(o == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("reaction substeps converge at fourth order") {
    const double eps = 0.05;
    const Field u{{0.31, 0.5, 0.29, 0.8}};
    const double dt = 5 * eps * eps;
    std::vector<double> err;
    for (double frac : {0.4, 0.2, 0.1}) {
        SolverConfig c;
        c.eps = eps;
        c.reaction_substep_fraction = frac;
        const Field v = step_reaction(c, f, u, dt);
        double e = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            KernelConfig k;
            k.tol = 1e-13;
            e = std::max(e, std::abs(v[i] - flow(f, k, dt / (eps * eps), u[i]).Y));
        }
        err.push_back(e);
    }
    MESSAGE("substep errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(std::log2(err[0] / err[1]) == doctest::Approx(4.0).epsilon(0.1));
    CHECK(std::log2(err[1] / err[2]) == doctest::Approx(4.0).epsilon(0.1));
}
