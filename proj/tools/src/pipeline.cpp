#include <layergen/cli/pipeline.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace layergen::cli {

namespace {

constexpr double M0_ratio_limit = 2.0;
constexpr double width_r2_limit = 0.98;
constexpr std::size_t coarse_divisors[] = {8, 4, 2};

RadialGrid make_grid(const RunConfig& cfg, const RadialGrid*, std::size_t divisor) {
    return RadialGrid(cfg.grid.N, cfg.grid.R, cfg.grid.Nr / divisor);
}

CartesianGrid2D make_grid(const RunConfig& cfg, const CartesianGrid2D*, std::size_t divisor) {
    return CartesianGrid2D(cfg.grid.Lx, cfg.grid.Ly, cfg.grid.Nx / divisor, cfg.grid.Ny / divisor);
}

std::vector<double> volumes(const RadialGrid& g) { return g.volumes; }
std::vector<double> volumes(const CartesianGrid2D& g) { return std::vector<double>(g.size(), g.cell_volume()); }

std::vector<TestFunction> tests_for(const RadialGrid& g) { return radial_test_functions(g); }
std::vector<TestFunction> tests_for(const CartesianGrid2D& g) { return box_test_functions(g); }

Field restrict_to(const Field& f, const RadialGrid& fine, const RadialGrid& coarse) {
    return restrict_radial(f, fine, coarse);
}
Field restrict_to(const Field& f, const CartesianGrid2D& fine, const CartesianGrid2D& coarse) {
    return restrict_box(f, fine, coarse);
}

std::size_t cells(const RadialGrid& g) { return g.Nr; }
std::size_t cells(const CartesianGrid2D& g) { return g.Nx; }

// Interface geometry of one case: r0 plus whatever the grid needs for
// distances.
struct Interface {
    double r0 = 0.0;
    std::vector<Segment> segments;
};

Interface locate(const RadialGrid&, const Field&, const InitialProfile& p, const BistableReaction& r) {
    return {gamma0_locate(p, r), {}};
}

Interface locate(const CartesianGrid2D& g, const Field& u0, const InitialProfile& p, const BistableReaction& r) {
    return {gamma0_locate(p, r), gamma0_locate(g, u0, r.a())};
}

double width_of(const Field& u, const RadialGrid& g, const InitialProfile&, double eta) {
    return measure_width(u, g, eta);
}
double width_of(const Field& u, const CartesianGrid2D& g, const InitialProfile& p, double eta) {
    return measure_width(u, g, p.center, eta);
}

std::vector<double> distances(const RadialGrid& g, const Interface& iface, const InitialProfile&, double) {
    return signed_distances(g, iface.r0);
}
std::vector<double> distances(const CartesianGrid2D& g, const Interface& iface, const InitialProfile& p, double a) {
    return signed_distances(g, iface.segments, p, a);
}

OptimalityResult scan(std::span<const Snapshot> snaps, const RadialGrid& g, const Field& u0, const Interface& iface,
                      const InitialProfile&, double a, double eps, double mu, double M0, double C, double probe_t,
                      const VerifyParams& vp) {
    return optimality_scan(snaps, g, u0, iface.r0, a, eps, mu, M0, C, probe_t, vp);
}
OptimalityResult scan(std::span<const Snapshot> snaps, const CartesianGrid2D& g, const Field& u0,
                      const Interface& iface, const InitialProfile& p, double a, double eps, double mu, double M0,
                      double C, double probe_t, const VerifyParams& vp) {
    return optimality_scan(snaps, g, u0, iface.segments, p, iface.r0, a, eps, mu, M0, C, probe_t, vp);
}

double slope_loglog(std::span<const double> x, std::span<const double> y) {
    // least squares slope of log y against log x
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

bool is_time(double t, double target) { return std::abs(t - target) <= 1e-12 * std::max(1.0, std::abs(target)); }

const Snapshot* snapshot_at(std::span<const Snapshot> snaps, double t) {
    for (const auto& s : snaps) {
        if (is_time(s.t, t)) return &s;
    }
    return nullptr;
}

template <class Grid>
void run_case_impl(const RunConfig& cfg, CaseResult& c) {
    const double eps = c.eps;
    const auto reaction = make_reaction(cfg);
    const double a = reaction.a();
    const double mu = reaction.mu();
    const auto profile = make_profile(cfg);
    const auto kernel = make_kernel(cfg);
    const auto vp = make_verify_params(cfg);
    vp.validate(a);

    const Grid grid = make_grid(cfg, static_cast<const Grid*>(nullptr), 1);
    const Field u0 = build_u0(grid, profile, a);
    const Interface iface = locate(grid, u0, profile, reaction);
    c.r0 = iface.r0;

    const GenerationClock clock(mu, eps);
    c.t_eps = clock.t_eps;
    const double t_end = cfg.solver.t_end_factor * clock.t_eps;

    EnvelopeParams ep;
    ep.eps = eps;
    ep.mu = mu;
    ep.m = cfg.solver.m;
    c.calibration = calibrate_Cstar(ep, profile, reaction, kernel, make_calibration_settings(cfg));
    const Envelope env(c.calibration->params, profile, reaction, c.calibration->kernel);

    SolverConfig sc;
    sc.m = cfg.solver.m;
    sc.eps = eps;
    sc.cfl_safety = cfg.solver.cfl_safety;
    sc.t_end = t_end;
    sc.snapshot_times = snapshot_schedule(mu, eps, t_end);

    const double t_cut = clock.t_eps * (1.0 + 1e-12);
    WeakResidualAccumulator weak(volumes(grid), tests_for(grid), &reaction, sc.m, eps);
    c.snapshots = run(sc, &reaction, grid, u0, [&](double t, const Field& u) {
        ++c.steps;
        if (t <= t_cut) weak.add(t, u);
    });
    {
        const auto res = weak.residuals();
        for (std::size_t q = 0; q < res.size(); ++q) c.weak_residuals.emplace_back(weak.tests()[q].name, res[q]);
    }

    // coarse ladder with dt proportional to h; the finest coarse level also
    // gives the self-convergence error of the main run
    {
        const Grid half = make_grid(cfg, static_cast<const Grid*>(nullptr), 2);
        const double u_cap = std::max(1.0, u0.max());
        const double dt_half =
            sc.cfl_safety * half.spacing() * half.spacing() /
            (2.0 * half.stencil_dimension() * sc.m * std::pow(u_cap, sc.m - 1));
        const double kappa = dt_half / half.spacing();
        WeakStudy& ws = c.weak_study;
        std::vector<double> hs;
        for (std::size_t div : coarse_divisors) {
            const Grid g = make_grid(cfg, static_cast<const Grid*>(nullptr), div);
            const Field v0 = build_u0(g, profile, a);
            SolverConfig lc = sc;
            lc.t_end = clock.t_eps;
            lc.snapshot_times.clear();
            for (double t : sc.snapshot_times) {
                if (t <= clock.t_eps) lc.snapshot_times.push_back(t);
            }
            lc.snapshot_times.push_back(clock.t_eps);
            lc.max_dt = kappa * g.spacing();
            WeakResidualAccumulator acc(volumes(g), tests_for(g), &reaction, sc.m, eps);
            auto snaps = run(lc, &reaction, g, v0, [&](double t, const Field& u) { acc.add(t, u); });
            ws.cells.push_back(cells(g));
            ws.residuals.push_back(acc.residuals());
            if (ws.tests.empty()) {
                for (const auto& tf : acc.tests()) ws.tests.push_back(tf.name);
            }
            hs.push_back(g.spacing());
            if (div == 2) {
                double err = 0.0;
                for (const auto& s : snaps) {
                    const Snapshot* fine = snapshot_at(c.snapshots, s.t);
                    if (!fine) continue;
                    err = std::max(err, linf_distance(s.field, restrict_to(fine->field, grid, g)));
                }
                c.self_convergence_linf = err;
            }
        }
        for (std::size_t q = 0; q < ws.tests.size(); ++q) {
            std::vector<double> r;
            for (const auto& lvl : ws.residuals) r.push_back(lvl[q]);
            std::vector<double> refinement;
            for (double h : hs) refinement.push_back(1.0 / h);
            ws.orders.push_back(convergence_orders(r, refinement));
            ws.slopes.push_back(slope_loglog(hs, r));
        }
    }

    c.sandwich = sandwich_check(c.snapshots, grid, env, vp.sandwich_tol);

    const Snapshot* at_teps = snapshot_at(c.snapshots, clock.t_eps);
    if (!at_teps) throw VerifyError("no snapshot at t_eps");
    c.bands = classify_bands(at_teps->field, u0, a, eps, vp);
    try {
        c.width = width_of(at_teps->field, grid, profile, vp.eta);
    } catch (const VerifyError& e) {
        c.failures.push_back({"width", e.what()});
    }
    const auto dist = distances(grid, iface, profile, a);
    c.Cthick = fit_thickness_constant(at_teps->field, dist, eps, vp);
    if (c.bands.M0 && c.Cthick) {
        c.optimality = scan(c.snapshots, grid, u0, iface, profile, a, eps, mu, *c.bands.M0, *c.Cthick,
                            clock.at_b(3.0), vp);
    }

    auto fail = [&](bool bad, const char* code, std::string msg) {
        if (bad) c.failures.push_back({code, std::move(msg)});
    };
    fail(c.sandwich.violations > 0, "sandwich",
         fmt::format("{} cells outside [w-, w+] by more than {}", c.sandwich.violations, vp.sandwich_tol));
    fail(!c.bands.bounds_ok, "bounds", fmt::format("{} cells outside [0, 1 + gamma]", c.bands.bound_violations));
    fail(!c.bands.M0, "bands", "M0 ladder exhausted");
    fail(!c.Cthick, "thickness", "thickness ladder exhausted");
    fail(c.bands.M0 && c.Cthick && !c.optimality.t_min, "t_min", "bands never hold before t_eps");
    fail(c.bands.M0 && c.Cthick && !c.optimality.probe_below, "probe",
         fmt::format("u = {} at distance C eps inside Gamma0 at t_eps(3) is not below 1 - eta",
                     c.optimality.probe_u));
    for (std::size_t q = 0; q < c.weak_study.tests.size(); ++q) {
        fail(!(c.weak_study.slopes[q] >= 1.0), "weak-order",
             fmt::format("test function {} decays at order {}", c.weak_study.tests[q], c.weak_study.slopes[q]));
    }
}

Json opt_num(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace

BistableReaction make_reaction(const RunConfig& cfg) {
    const auto base = BistableReaction::cubic(cfg.reaction.a);
    if (cfg.reaction.delta == 0.0) return base;
    return perturb(base, cfg.reaction.delta).reaction();
}

InitialProfile make_profile(const RunConfig& cfg) {
    InitialProfile p;
    p.c0 = cfg.profile.c0;
    p.R0 = cfg.profile.R0;
    if (cfg.grid.mode == "radial") {
        p.dim = cfg.grid.N;
    } else {
        p.dim = 2;
        p.center = {0.5 * cfg.grid.Lx, 0.5 * cfg.grid.Ly};
    }
    return p;
}

KernelConfig make_kernel(const RunConfig& cfg) {
    KernelConfig k;
    k.tol = cfg.kernel.tol;
    k.dtau_max = cfg.kernel.dtau_max;
    k.C0 = cfg.profile.c0 + 1.0;
    return k;
}

VerifyParams make_verify_params(const RunConfig& cfg) {
    VerifyParams vp;
    vp.gamma = cfg.verify.gamma;
    vp.eta = cfg.verify.eta;
    vp.sandwich_tol = cfg.verify.sandwich_tol;
    return vp;
}

CalibrationSettings make_calibration_settings(const RunConfig& cfg) {
    CalibrationSettings s;
    s.space_samples = cfg.envelope.space_samples;
    s.time_samples = cfg.envelope.time_samples;
    return s;
}

std::vector<double> snapshot_schedule(double mu, double eps, double t_end) {
    const GenerationClock clock(mu, eps);
    const double te = clock.t_eps;
    std::vector<double> ts = {0.0, 0.25 * te, 0.5 * te, 0.75 * te, clock.at_b(1.0), clock.at_b(2.0),
                              clock.at_b(3.0), te, 1.5 * te, 2.0 * te};
    const double lneps = std::abs(std::log(eps));
    for (int j = -40;; ++j) {
        const double b = std::pow(10.0, j / 20.0);
        if (b >= lneps) break;
        ts.push_back(clock.at_b(b));
    }
    std::vector<double> out;
    for (double t : ts) {
        if (t >= 0.0 && t <= t_end) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

CaseResult run_case(const RunConfig& cfg, double eps) {
    CaseResult c;
    c.eps = eps;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (cfg.grid.mode == "radial") run_case_impl<RadialGrid>(cfg, c);
        else run_case_impl<CartesianGrid2D>(cfg, c);
        c.completed = true;
    } catch (const std::exception& e) {
        c.error = e.what();
        c.failures.push_back({"error", e.what()});
    }
    c.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return c;
}

Json case_json(const RunConfig& cfg, const CaseResult& c) {
    Json j;
    j["schema_version"] = schema_version;
    j["eps"] = c.eps;
    j["status"] = c.passed() ? "pass" : (c.completed ? "fail" : "error");
    j["t_gen"] = c.t_eps;
    j["r0"] = c.r0;
    if (c.calibration) {
        j["Cstar"] = c.calibration->params.Cstar;
        j["margin_minus"] = c.calibration->margin_minus;
        j["margin_plus"] = c.calibration->margin_plus;
        j["xi_max"] = c.calibration->xi_max;
        j["xi_within_C0"] = c.calibration->xi_within_C0;
    } else {
        j["Cstar"] = nullptr;
    }
    j["M0"] = opt_num(c.bands.M0);
    j["M0_needed"] = c.bands.M0_needed;
    j["bounds_ok"] = c.bands.bounds_ok;
    j["u_min"] = c.completed ? Json(c.bands.u_min) : Json(nullptr);
    j["u_max"] = c.completed ? Json(c.bands.u_max) : Json(nullptr);
    j["width_eta"] = c.width;
    j["Cthick_fit"] = opt_num(c.Cthick);
    j["t_min"] = opt_num(c.optimality.t_min);
    j["b_fit"] = opt_num(c.optimality.b_fit);
    j["probe"] = {{"t", c.optimality.probe_t},
                  {"u", c.optimality.probe_u},
                  {"below_1_minus_eta", c.optimality.probe_below}};
    j["sandwich_violations"] = c.sandwich.violations;
    j["sandwich"] = {{"checked", c.sandwich.checked},
                     {"snapshots", c.sandwich.snapshots},
                     {"worst_margin", c.sandwich.worst_margin},
                     {"worst_t", c.sandwich.worst_t},
                     {"worst_rho", c.sandwich.worst_rho},
                     {"tol", cfg.verify.sandwich_tol},
                     {"self_convergence_linf", c.self_convergence_linf},
                     {"tol_budget", 3.0 * c.self_convergence_linf},
                     {"tol_covers_budget", cfg.verify.sandwich_tol >= 3.0 * c.self_convergence_linf}};
    Json weak = Json::object();
    for (const auto& [name, v] : c.weak_residuals) weak[name] = v;
    j["weak_residuals"] = weak;
    Json orders = Json::object();
    for (std::size_t q = 0; q < c.weak_study.tests.size(); ++q) {
        Json r = Json::array();
        for (const auto& lvl : c.weak_study.residuals) r.push_back(lvl[q]);
        orders[c.weak_study.tests[q]] = {
            {"residuals", r}, {"pairwise", c.weak_study.orders[q]}, {"slope", c.weak_study.slopes[q]}};
    }
    j["orders"] = orders;
    j["weak_ladder_cells"] = c.weak_study.cells;
    j["steps"] = c.steps;
    Json fails = Json::array();
    for (const auto& f : c.failures) fails.push_back({{"code", f.code}, {"message", f.message}});
    j["failures"] = fails;
    return j;
}

void write_case(const RunConfig& cfg, const CaseResult& c, const std::filesystem::path& dir) {
    RunConfig eff = cfg;
    eff.solver.eps = c.eps;
    write_file(dir / "effective_config.txt", echo_config(eff));
    if (cfg.write_json()) write_file(dir / "report.json", to_json_text(case_json(cfg, c)));
    if (cfg.write_csv() && !c.snapshots.empty()) {
        const auto profile = make_profile(cfg);
        (void)profile;
        if (cfg.grid.mode == "radial") {
            write_file(dir / "snapshots.csv", snapshots_csv(c.snapshots, make_grid(cfg, static_cast<const RadialGrid*>(nullptr), 1)));
        } else {
            write_file(dir / "snapshots.csv",
                       snapshots_csv(c.snapshots, make_grid(cfg, static_cast<const CartesianGrid2D*>(nullptr), 1)));
        }
    }
    write_file(dir / "timings.txt", fmt::format("runtime_s {:.3f}\nsteps {}\n", c.runtime_s, c.steps));
}

std::optional<WidthFit> fit_width(std::span<const double> eps, std::span<const double> width) {
    if (eps.size() != width.size() || eps.size() < 2) return std::nullopt;
    double sxy = 0, sxx = 0, mean = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        sxy += eps[i] * width[i];
        sxx += eps[i] * eps[i];
        mean += width[i];
    }
    mean /= static_cast<double>(eps.size());
    WidthFit fit;
    fit.C = sxy / sxx;
    fit.points = eps.size();
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        ss_res += (width[i] - fit.C * eps[i]) * (width[i] - fit.C * eps[i]);
        ss_tot += (width[i] - mean) * (width[i] - mean);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return fit;
}

bool SweepResult::passed() const {
    if (!failures.empty()) return false;
    return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.passed(); });
}

SweepResult run_sweep(const RunConfig& cfg, std::size_t jobs) {
    SweepResult s;
    const auto& list = cfg.sweep.eps_list;
    s.cases.resize(list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < list.size(); i = next++) s.cases[i] = run_case(cfg, list[i]);
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, list.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<double> es, ws, bs, m0s;
    for (const auto& c : s.cases) {
        if (!c.completed) continue;
        if (c.width > 0.0) {
            es.push_back(c.eps);
            ws.push_back(c.width);
        }
        if (c.optimality.b_fit) bs.push_back(*c.optimality.b_fit);
        if (c.bands.M0) m0s.push_back(*c.bands.M0);
    }
    s.width_fit = fit_width(es, ws);
    if (!s.width_fit) {
        s.width_fit_notice = "width fit skipped: fewer than two measured widths";
    } else if (s.width_fit->r2 < width_r2_limit) {
        s.failures.push_back({"width-fit", fmt::format("R^2 = {} below {}", s.width_fit->r2, width_r2_limit)});
    }
    if (!bs.empty()) {
        s.b_min = *std::min_element(bs.begin(), bs.end());
        s.b_max = *std::max_element(bs.begin(), bs.end());
        double sum = 0;
        for (double b : bs) sum += b;
        s.b_mean = sum / static_cast<double>(bs.size());
        if (*s.b_min < 0.0 || *s.b_max > b_cap_limit) {
            s.failures.push_back({"b-range", fmt::format("empirical b outside [0, {}]", b_cap_limit)});
        }
    }
    if (!m0s.empty()) {
        s.M0_ratio = *std::max_element(m0s.begin(), m0s.end()) / *std::min_element(m0s.begin(), m0s.end());
        if (*s.M0_ratio > M0_ratio_limit) {
            s.failures.push_back({"M0-ratio", fmt::format("max/min M0 = {} above {}", *s.M0_ratio, M0_ratio_limit)});
        }
    }
    return s;
}

void write_sweep(const RunConfig& cfg, const SweepResult& s) {
    const std::filesystem::path root = cfg.output.dir;
    for (const auto& c : s.cases) write_case(cfg, c, root / eps_label(c.eps));
    write_file(root / "effective_config.txt", echo_config(cfg));

    auto cell = [](const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); };
    if (cfg.write_csv()) {
        std::string csv = "epsilon,t_gen,width,M0,t_min,b_fit\n";
        for (const auto& c : s.cases) {
            csv += fmt::format("{},{},{},{},{},{}\n", fmt_real(c.eps), c.completed ? fmt_real(c.t_eps) : "",
                               c.completed ? fmt_real(c.width) : "", cell(c.bands.M0), cell(c.optimality.t_min),
                               cell(c.optimality.b_fit));
        }
        write_file(root / "sweep.csv", csv);
    }
    if (cfg.write_json()) {
        Json j;
        j["schema_version"] = schema_version;
        j["status"] = s.passed() ? "pass" : "fail";
        Json entries = Json::array();
        for (const auto& c : s.cases) {
            entries.push_back({{"epsilon", c.eps},
                               {"status", c.passed() ? "pass" : (c.completed ? "fail" : "error")},
                               {"t_gen", c.t_eps},
                               {"width", c.width},
                               {"M0", opt_num(c.bands.M0)},
                               {"Cthick_fit", opt_num(c.Cthick)},
                               {"t_min", opt_num(c.optimality.t_min)},
                               {"b_fit", opt_num(c.optimality.b_fit)},
                               {"report", eps_label(c.eps) + "/report.json"}});
        }
        j["entries"] = entries;
        if (s.width_fit) {
            j["width_fit"] = {{"C", s.width_fit->C}, {"r2", s.width_fit->r2}, {"points", s.width_fit->points}};
        } else {
            j["width_fit"] = {{"notice", s.width_fit_notice}};
        }
        j["b"] = {{"min", opt_num(s.b_min)}, {"max", opt_num(s.b_max)}, {"mean", opt_num(s.b_mean)},
                  {"cap", b_cap_limit}};
        j["M0_ratio"] = opt_num(s.M0_ratio);
        Json fails = Json::array();
        for (const auto& f : s.failures) fails.push_back({{"code", f.code}, {"message", f.message}});
        j["failures"] = fails;
        write_file(root / "sweep.json", to_json_text(j));
    }
}

} // namespace layergen::cli
