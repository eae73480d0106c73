// Acceptance suite: one PASS/FAIL line per criterion, default setting unless
// a criterion says otherwise.

#include <layergen/cli/app.hpp>
#include <layergen/cli/config.hpp>
#include <layergen/cli/pipeline.hpp>
#include <layergen/envelope.hpp>
#include <layergen/ode_kernel.hpp>
#include <layergen/solver.hpp>
#include <layergen/verify.hpp>

#include "oracles.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace layergen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back((ok ? "" : "NOT ") + what);
    }
    void note(const std::string& what) { notes.push_back(what); }
};

const BistableReaction f = BistableReaction::cubic(0.3);
const double mu = 0.21;

// ---------------------------------------------------------------------------

Verdict kernel_suite() {
    Verdict v;
    const auto t0 = Clock::now();
    const KernelConfig cfg;
    const double tau_cap = std::abs(std::log(0.005)) / mu;

    double eq_err = 0.0;
    for (double z : {0.0, 0.3, 1.0}) {
        for (double tau : {1.0, 10.0, 100.0, 1000.0}) eq_err = std::max(eq_err, std::abs(flow(f, cfg, tau, z).Y - z));
    }
    v.require(eq_err <= 1e-10, fmt::format("equilibria fixed (max drift {:.2e})", eq_err));

    oracle::Rng rng(20240611);
    std::size_t order_bad = 0, sign_bad = 0, bound_bad = 0, slope_bad = 0;
    for (int k = 0; k < 1000; ++k) {
        const double tau = rng.uniform(0.0, tau_cap);
        const double x1 = rng.uniform(-cfg.C0, cfg.C0), x2 = rng.uniform(-cfg.C0, cfg.C0);
        const auto r1 = flow(f, cfg, tau, x1), r2 = flow(f, cfg, tau, x2);
        if (x1 != x2 && (x1 < x2) != (r1.Y < r2.Y)) ++order_bad;
        if ((x1 > 0 && !(r1.Y > 0)) || (x1 < 0 && !(r1.Y < 0))) ++sign_bad;
        if (!(std::abs(r1.Y) <= cfg.C0)) ++bound_bad;
        if (!(r1.Y_xi > 0.0)) ++slope_bad;
    }
    v.require(order_bad == 0, fmt::format("monotone in xi ({} violations / 1000)", order_bad));
    v.require(sign_bad == 0, fmt::format("sign preserved ({} violations)", sign_bad));
    v.require(bound_bad == 0, fmt::format("|Y| <= C0 ({} violations)", bound_bad));
    v.require(slope_bad == 0, fmt::format("Y_xi > 0 ({} violations)", slope_bad));

    // central differences of an independent fixed-step flow, taken in the
    // deviation from the nearest zero so that Y near 0, a or 1 keeps its digits
    double fd_worst = 0.0;
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const double tau = rng.uniform(0.0, tau_cap);
        const double xi = rng.uniform(-cfg.C0 + 2 * h, cfg.C0 - 2 * h);
        const auto r = flow(f, cfg, tau, xi);
        const double c = oracle::nearest_zero(0.3, r.Y);
        const auto n = static_cast<std::size_t>(std::ceil(tau / 1e-3)) + 1;
        const double fd = (oracle::cubic_deviation(0.3, c, (xi + h) - c, tau, n) -
                           oracle::cubic_deviation(0.3, c, (xi - h) - c, tau, n)) / (2 * h);
        fd_worst = std::max(fd_worst, std::abs(r.Y_xi - fd) / std::abs(r.Y_xi));
    }
    v.require(fd_worst <= 1e-4, fmt::format("Y_xi vs central differences at 100 points (worst rel {:.2e})", fd_worst));
    double sg_worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double t1 = rng.uniform(0.0, tau_cap / 2), t2 = rng.uniform(0.0, tau_cap / 2);
        const double xi = rng.uniform(-cfg.C0, cfg.C0);
        const double a = flow(f, cfg, t1 + t2, xi).Y;
        const double b = flow(f, cfg, t2, flow(f, cfg, t1, xi).Y).Y;
        sg_worst = std::max(sg_worst, std::abs(a - b));
    }
    v.require(sg_worst <= 1e-9, fmt::format("semigroup (worst {:.2e})", sg_worst));

    const double secs = seconds_since(t0);
    v.require(secs < 10.0, fmt::format("runtime {:.2f} s < 10 s", secs));
    return v;
}

Verdict curvature_bound() {
    Verdict v;
    const KernelConfig cfg;
    const double tau_cap = std::abs(std::log(0.005)) / mu;
    const auto a = fit_curvature_bound(f, cfg, tau_cap, 1000, 20240611);
    const auto b = fit_curvature_bound(f, cfg, tau_cap, 4000, 20240611);
    const double rel = std::abs(b.C - a.C) / a.C;
    v.require(std::isfinite(a.C) && std::isfinite(b.C), fmt::format("C = {:.6g} (1000), {:.6g} (4000)", a.C, b.C));
    v.require(rel <= 0.10, fmt::format("stable within 10% (change {:.2f}%)", 100 * rel));
    return v;
}

Verdict linearization() {
    Verdict v;
    const KernelConfig cfg;
    const auto a = fit_linearization(f, cfg, 0.1, 1000);
    const auto b = fit_linearization(f, cfg, 0.1, 2000);
    v.require(a.C1 > 0.0 && a.C1 <= 1.0 && a.C2 >= 1.0, fmt::format("0 < C1 = {:.6g} <= 1 <= C2 = {:.6g}", a.C1, a.C2));
    v.require(a.C2 / a.C1 < 10.0, fmt::format("C2/C1 = {:.4g} < 10", a.C2 / a.C1));
    const double d1 = std::abs(b.C1 - a.C1) / a.C1, d2 = std::abs(b.C2 - a.C2) / a.C2;
    v.require(d1 <= 0.05 && d2 <= 0.05,
              fmt::format("stable under doubling (C1 {:.3f}%, C2 {:.3f}%)", 100 * d1, 100 * d2));
    return v;
}

// Deviation of w^-/+ from the zero c, built from the closed-form drift and a
// fixed-step RK4 flow; independent of the library's kernel.
double oracle_deviation(const EnvelopeParams& p, const InitialProfile& profile, double c, double rho, double t,
                        Side side) {
    const double e2 = p.eps * p.eps;
    const double drift = e2 * p.Cstar * std::expm1(p.mu * t / e2);
    const double xi = profile.value(rho) + (side == Side::plus ? drift : -drift);
    const double tau = t / e2;
    const auto n = static_cast<std::size_t>(std::ceil(tau / 1e-3)) + 1;
    return oracle::cubic_deviation(0.3, c, xi - c, tau, n);
}

Verdict envelope_signs() {
    Verdict v;
    const double eps = 0.01;
    const InitialProfile profile;
    const auto cal = calibrate_Cstar(EnvelopeParams{eps, 1.0, mu, 2}, profile, f, KernelConfig{});
    const Envelope env(cal.params, profile, f, cal.kernel);
    v.note(fmt::format("Cstar = {:g}", cal.params.Cstar));

    // re-walk the calibration grid independently
    const CalibrationSettings s;
    std::size_t points = 0, bad = 0;
    for (std::size_t j = 0; j < s.time_samples; ++j) {
        const double t = env.t_eps() * static_cast<double>(j) / static_cast<double>(s.time_samples - 1);
        for (std::size_t i = 0; i < s.space_samples; ++i) {
            const double rho = s.sample_radius_factor * profile.R0 * (i + 0.5) / static_cast<double>(s.space_samples);
            ++points;
            if (!(env.residual_L(rho, t, Side::plus) >= 0.0)) ++bad;
            if (env.xi(rho, t, Side::minus) > 0.0) {
                ++points;
                if (!(env.residual_L(rho, t, Side::minus) <= 0.0)) ++bad;
            }
        }
    }
    v.require(points >= 1000 && bad == 0, fmt::format("signs hold at {} points ({} violations)", points, bad));

    // analytic L against a finite-difference L of densely sampled barriers
    oracle::Rng rng(20240611);
    double worst = 0.0;
    int n = 0;
    while (n < 100) {
        const double t = rng.uniform(0.01, 0.99) * env.t_eps();
        const double rho = rng.uniform(0.01, 0.6);
        const Side side = n % 2 == 0 ? Side::minus : Side::plus;
        if (std::abs(rho - profile.R0) < 0.01) continue;
        if (side == Side::minus && env.xi(rho, t, side) < 0.01) continue;
        const double c = oracle::nearest_zero(0.3, env.eval_w(rho, t, side));
        const auto z = [&](double r, double s) { return oracle_deviation(cal.params, profile, c, r, s, side); };
        const double fd = oracle::fd_residual_deviation(z, 0.3, c, rho, t, 2, 2, eps, 1e-4, 1e-3 * eps * eps);
        const double L = env.residual_L(rho, t, side);
        worst = std::max(worst, std::abs(fd - L) / std::abs(L));
        ++n;
    }
    v.require(worst <= 1e-3, fmt::format("analytic vs finite-difference L at 100 points (worst rel {:.2e})", worst));
    return v;
}

// ---------------------------------------------------------------------------

const cli::CaseResult* find_case(const cli::SweepResult& s, double eps) {
    for (const auto& c : s.cases) {
        if (c.eps == eps) return &c;
    }
    return nullptr;
}

Verdict sandwich(const cli::RunConfig& cfg, const cli::SweepResult& s) {
    Verdict v;
    const auto* c = find_case(s, 0.02);
    if (!c || !c->completed) {
        v.require(false, "eps = 0.02 case completed");
        return v;
    }
    const double tol = cfg.verify.sandwich_tol;
    v.require(c->sandwich.violations == 0,
              fmt::format("{} violations over {} snapshots in [0, t_eps] (worst margin {:.3g})", c->sandwich.violations,
                          c->sandwich.snapshots, c->sandwich.worst_margin));
    v.require(tol >= 3.0 * c->self_convergence_linf,
              fmt::format("sandwich_tol {:g} >= 3 x self-convergence {:.3g}", tol, c->self_convergence_linf));
    v.require(c->runtime_s < 60.0, fmt::format("runtime {:.1f} s < 60 s", c->runtime_s));
    return v;
}

Verdict bands(const cli::SweepResult& s) {
    Verdict v;
    double lo = 1e300, hi = 0.0;
    for (double eps : {0.02, 0.01, 0.005}) {
        const auto* c = find_case(s, eps);
        if (!c || !c->completed) {
            v.require(false, fmt::format("eps = {:g} completed", eps));
            continue;
        }
        v.require(c->bands.bounds_ok, fmt::format("eps = {:g}: u in [{:.4g}, {:.4g}] within [0, 1.1]", eps,
                                                  c->bands.u_min, c->bands.u_max));
        v.require(c->bands.M0.has_value(),
                  fmt::format("eps = {:g}: M0 = {}", eps, c->bands.M0 ? fmt::format("{:g}", *c->bands.M0) : "none"));
        if (c->bands.M0) {
            lo = std::min(lo, *c->bands.M0);
            hi = std::max(hi, *c->bands.M0);
        }
    }
    if (hi > 0.0) v.require(hi / lo <= 2.0, fmt::format("M0 max/min = {:.4g} <= 2", hi / lo));
    return v;
}

Verdict thickness(const cli::SweepResult& s) {
    Verdict v;
    std::vector<double> eps, width;
    for (double e : {0.04, 0.02, 0.01, 0.005}) {
        const auto* c = find_case(s, e);
        if (!c || !c->completed) {
            v.require(false, fmt::format("eps = {:g} completed", e));
            continue;
        }
        eps.push_back(e);
        width.push_back(c->width);
        v.note(fmt::format("width({:g}) = {:.5g} = {:.4g} eps", e, c->width, c->width / e));
    }
    // least squares through the origin, computed here rather than taken from the sweep
    double sxy = 0.0, sxx = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        sxy += eps[i] * width[i];
        sxx += eps[i] * eps[i];
        mean += width[i];
    }
    if (eps.size() < 2) return v;
    mean /= static_cast<double>(eps.size());
    const double C = sxy / sxx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        ss_res += std::pow(width[i] - C * eps[i], 2);
        ss_tot += std::pow(width[i] - mean, 2);
    }
    const double r2 = 1.0 - ss_res / ss_tot;
    v.require(r2 >= 0.98, fmt::format("fit width = {:.4g} eps, R^2 = {:.5f} >= 0.98", C, r2));
    if (s.width_fit) v.require(std::abs(s.width_fit->r2 - r2) < 1e-12, "sweep report agrees with the fit");
    return v;
}

Verdict optimality(const cli::SweepResult& s) {
    Verdict v;
    std::vector<double> bs;
    for (const auto& c : s.cases) {
        if (!c.completed) {
            v.require(false, fmt::format("eps = {:g} completed", c.eps));
            continue;
        }
        if (!c.optimality.b_fit) {
            v.require(false, fmt::format("eps = {:g}: t_min found", c.eps));
            continue;
        }
        bs.push_back(*c.optimality.b_fit);
        v.require(c.optimality.probe_below,
                  fmt::format("eps = {:g}: b = {:.4g}; probe at t = {:.4g} (t_eps(3) = {:.4g}), r0 - {:g} eps: u = {:.4f} (below 0.9 required)",
                              c.eps, *c.optimality.b_fit, c.optimality.probe_t,
                              GenerationClock(mu, c.eps).at_b(3.0), c.Cthick.value_or(0.0), c.optimality.probe_u));
    }
    if (!bs.empty()) {
        const auto [lo, hi] = std::minmax_element(bs.begin(), bs.end());
        v.require(*lo >= 0.0 && *hi <= cli::b_cap_limit,
                  fmt::format("b in [{:.4g}, {:.4g}] within [0, b_cap = {:g}]", *lo, *hi, cli::b_cap_limit));
    }
    return v;
}

Verdict solver_properties() {
    Verdict v;
    const RadialGrid g(2, 1.0, 2048);
    const InitialProfile p;
    const double eps = 0.01;
    const double te = generation_time(mu, eps);

    // f = 0: mass over the full horizon, checked after every step
    {
        SolverConfig c;
        c.eps = eps;
        c.t_end = 2 * te;
        const Field u0 = build_u0(g, p, 0.3);
        const double m0 = integral(g, u0);
        double worst = 0.0;
        std::size_t steps = 0;
        run(c, nullptr, g, u0, [&](double, const Field& u) {
            worst = std::max(worst, std::abs(integral(g, u) - m0) / m0);
            ++steps;
        });
        v.require(worst <= 1e-12, fmt::format("f = 0 mass drift {:.2e} over {} steps", worst, steps));
    }

    // nested data advanced in lockstep; order and bounds checked every step
    {
        InitialProfile lower = p;
        lower.c0 = 0.7;
        Field lo = build_u0(g, lower, 0.3), hi = build_u0(g, p, 0.3);
        SolverConfig c;
        c.eps = eps;
        // the step for the a priori bound max u <= 1, valid for both fields throughout
        const double dt_bound = cfl_dt(c, g, Field{std::vector<double>(g.size(), 1.0)});
        double t = 0.0, worst_order = 0.0, lo_min = 0.0, hi_max = 0.0;
        std::size_t steps = 0;
        while (t < te) {
            const double dt = std::min(dt_bound, te - t);
            lo = strang_step(c, &f, g, lo, dt);
            hi = strang_step(c, &f, g, hi, dt);
            t += dt;
            ++steps;
            for (std::size_t i = 0; i < g.size(); ++i) {
                worst_order = std::max(worst_order, lo[i] - hi[i]);
                lo_min = std::min(lo_min, lo[i]);
                hi_max = std::max(hi_max, hi[i]);
            }
        }
        v.require(worst_order <= 1e-12, fmt::format("nested data ordered (max excess {:.2e}, {} steps)", worst_order, steps));
        v.require(lo_min >= -1e-12 && hi_max <= 1.0 + 1e-12,
                  fmt::format("0 <= u <= max(1, |u0|) every step (min {:.3g}, max {:.17g})", lo_min, hi_max));
    }
    return v;
}

Verdict weak_order(const cli::SweepResult& s) {
    Verdict v;
    for (const auto& c : s.cases) {
        if (!c.completed) {
            v.require(false, fmt::format("eps = {:g} completed", c.eps));
            continue;
        }
        const auto& w = c.weak_study;
        v.require(w.tests.size() >= 3 && w.tests[0] == "one", fmt::format("eps = {:g}: {} test functions incl. phi = 1",
                                                                          c.eps, w.tests.size()));
        for (std::size_t k = 0; k < w.tests.size(); ++k) {
            const double min_pair = *std::min_element(w.orders[k].begin(), w.orders[k].end());
            v.require(min_pair >= 1.0 && w.slopes[k] >= 1.0,
                      fmt::format("eps = {:g} {}: order {:.3f} (pairwise min {:.3f})", c.eps, w.tests[k], w.slopes[k],
                                  min_pair));
        }
    }
    return v;
}

std::map<std::string, std::string> output_files(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext != ".csv" && ext != ".json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = s.str();
    }
    return out;
}

Verdict determinism(const fs::path& first, const fs::path& config_file, const fs::path& second) {
    Verdict v;
    fs::remove_all(second);
    std::ostringstream out, err;
    const int code = cli::run_cli({"sweep", "-c", config_file.string(), "-o", second.string()}, out, err);
    v.note(fmt::format("repeat sweep exit code {}", code));
    const auto a = output_files(first), b = output_files(second);
    std::size_t differ = 0;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != bytes) ++differ;
    }
    v.require(!a.empty() && a.size() == b.size() && differ == 0,
              fmt::format("{} CSV/JSON files, {} differ", a.size(), differ));
    return v;
}

Verdict wall_time(const cli::SweepResult& s, double total) {
    Verdict v;
    v.require(total <= 900.0, fmt::format("sweep over {} eps values took {:.1f} s <= 900 s", s.cases.size(), total));
    const auto* c = find_case(s, 0.005);
    v.require(c && c->runtime_s <= 300.0, fmt::format("eps = 0.005 run {:.1f} s <= 300 s", c ? c->runtime_s : -1.0));
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string out_dir = "acceptance_out";
    std::vector<int> only;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("-o,--out", out_dir, "directory for sweep outputs");
    app.add_option("--only", only, "run only these criteria");
    app.add_option("-j,--jobs", jobs, "concurrent eps values in the sweep");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> wanted(only.begin(), only.end());
    const auto want = [&](std::initializer_list<int> ids) {
        if (wanted.empty()) return true;
        return std::any_of(ids.begin(), ids.end(), [&](int i) { return wanted.count(i) > 0; });
    };

    const fs::path root = fs::absolute(out_dir);
    fs::create_directories(root);

    std::map<int, Verdict> verdicts;
    std::map<int, double> times;
    const auto timed = [&](int id, const std::function<Verdict()>& fn) {
        const auto t0 = Clock::now();
        try {
            verdicts[id] = fn();
        } catch (const std::exception& e) {
            Verdict v;
            v.require(false, std::string("threw: ") + e.what());
            verdicts[id] = v;
        }
        times[id] = seconds_since(t0);
    };

    if (want({1})) timed(1, kernel_suite);
    if (want({2})) timed(2, curvature_bound);
    if (want({3})) timed(3, linearization);
    if (want({4})) timed(4, envelope_signs);
    if (want({9})) timed(9, solver_properties);

    if (want({5, 6, 7, 8, 10, 11, 12})) {
        cli::RunConfig cfg;
        cfg.sweep.eps_list = {0.04, 0.02, 0.01, 0.005};
        cfg.output.dir = (root / "sweep").string();
        fs::remove_all(cfg.output.dir);
        const fs::path config_file = root / "sweep.cfg";
        {
            std::ofstream cf(config_file);
            cf << cli::echo_config(cfg);
        }
        std::cout << fmt::format("running sweep over eps = 0.04, 0.02, 0.01, 0.005 (jobs = {}) ...\n", jobs)
                  << std::flush;
        const auto t0 = Clock::now();
        const auto sweep = cli::run_sweep(cfg, jobs);
        cli::write_sweep(cfg, sweep);
        const double total = seconds_since(t0);
        for (const auto& c : sweep.cases) {
            std::cout << fmt::format("  eps = {:g}: {} in {:.1f} s, {} steps\n", c.eps,
                                     c.completed ? "completed" : "ERROR " + c.error, c.runtime_s, c.steps);
        }

        if (want({5})) timed(5, [&] { return sandwich(cfg, sweep); });
        if (want({6})) timed(6, [&] { return bands(sweep); });
        if (want({7})) timed(7, [&] { return thickness(sweep); });
        if (want({8})) timed(8, [&] { return optimality(sweep); });
        if (want({10})) timed(10, [&] { return weak_order(sweep); });
        if (want({12})) timed(12, [&] { return wall_time(sweep, total); });
        if (want({11})) timed(11, [&] { return determinism(cfg.output.dir, config_file, root / "sweep_repeat"); });
    }

    static const std::map<int, std::string> names{
        {1, "ODE kernel suite"},    {2, "curvature bound"},      {3, "linearization"},
        {4, "envelope signs"},      {5, "sandwich"},             {6, "generation bands"},
        {7, "thickness"},           {8, "optimality"},           {9, "solver conservation/bounds"},
        {10, "weak residual"},      {11, "determinism"},         {12, "wall time"}};

    bool all = true;
    std::cout << "\n";
    for (const auto& [id, v] : verdicts) {
        all = all && v.pass;
        std::cout << fmt::format("criterion {:>2} {}: {} ({:.1f} s)\n", id, v.pass ? "PASS" : "FAIL", names.at(id),
                                 times[id]);
        for (const auto& n : v.notes) std::cout << "    " << n << "\n";
    }
    std::cout << (all ? "all selected criteria pass\n" : "some criteria FAIL\n");
    return all ? 0 : 1;
}
