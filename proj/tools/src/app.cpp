#include <layergen/cli/app.hpp>

#include <layergen/cli/config.hpp>
#include <layergen/cli/output.hpp>
#include <layergen/cli/pipeline.hpp>
#include <layergen/ode_kernel.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace layergen::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "configuration file (key = value lines)");
    sub->add_option("-s,--set", c.overrides, "override, key=value (repeatable)")->allow_extra_args(false);
    sub->add_option("-o,--out", c.out, "output directory (overrides output.dir)");
}

RunConfig load(const Common& c) {
    auto overrides = c.overrides;
    if (!c.out.empty()) overrides.push_back("output.dir=" + c.out);
    return load_config(c.config, overrides);
}

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{:.6g}", *v) : "-"; }

// ---------------------------------------------------------------------------

int cmd_ode(const RunConfig& cfg, double tau_max, std::size_t n_tau, std::size_t n_xi, std::size_t samples,
            std::ostream& out) {
    const auto r = make_reaction(cfg);
    const auto k = make_kernel(cfg);
    const double mu = r.mu();
    const fs::path root = cfg.output.dir;

    std::vector<double> taus(n_tau);
    for (std::size_t j = 0; j < n_tau; ++j) {
        taus[j] = n_tau == 1 ? tau_max : tau_max * static_cast<double>(j) / static_cast<double>(n_tau - 1);
    }
    if (cfg.write_csv()) {
        std::string csv = "tau,xi,Y,Y_xi,Y_xixi\n";
        for (std::size_t i = 0; i < n_xi; ++i) {
            const double xi = -k.C0 + 2.0 * k.C0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_xi);
            for (const auto& s : flow_at(r, k, xi, taus)) {
                csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.tau, s.xi, s.Y, s.Y_xi, s.Y_xixi);
            }
        }
        write_file(root / "ode.csv", csv);
    }

    const auto curv = fit_curvature_bound(r, k, tau_max, samples, cfg.seed);
    const double C_Y = find_after_time_constant(r, k, cfg.solver.eps, cfg.verify.gamma);
    const auto lin = fit_linearization(r, k, cfg.verify.eta);
    const bool ok = std::isfinite(curv.C) && lin.C1 > 0.0 && lin.C1 <= 1.0 && lin.C2 >= 1.0;

    Json j;
    j["schema_version"] = schema_version;
    j["status"] = ok ? "pass" : "fail";
    j["a"] = r.a();
    j["mu"] = mu;
    j["tau_max"] = tau_max;
    j["curvature_fit"] = {{"C", curv.C},
                          {"tau_at_max", curv.tau_at_max},
                          {"xi_at_max", curv.xi_at_max},
                          {"samples", curv.samples}};
    j["after_time"] = {{"eps", cfg.solver.eps}, {"gamma", cfg.verify.gamma}, {"C_Y", C_Y}};
    j["linearization"] = {{"eta", lin.eta}, {"C1", lin.C1}, {"C2", lin.C2}, {"samples", lin.samples}};
    if (cfg.write_json()) write_file(root / "ode.json", to_json_text(j));
    write_file(root / "effective_config.txt", echo_config(cfg));

    out << fmt::format("curvature bound C = {:.6g} ({} samples)\n", curv.C, curv.samples);
    out << fmt::format("after-time constant C_Y = {:.6g} (eps = {:g}, gamma = {:g})\n", C_Y, cfg.solver.eps,
                       cfg.verify.gamma);
    out << fmt::format("linearization C1 = {:.6g}, C2 = {:.6g} (eta = {:g})\n", lin.C1, lin.C2, lin.eta);
    return ok ? exit_pass : exit_check_failed;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const double eps = cfg.solver.eps;
    const auto r = make_reaction(cfg);
    const auto profile = make_profile(cfg);
    const GenerationClock clock(r.mu(), eps);
    SolverConfig sc;
    sc.m = cfg.solver.m;
    sc.eps = eps;
    sc.cfl_safety = cfg.solver.cfl_safety;
    sc.t_end = cfg.solver.t_end_factor * clock.t_eps;
    sc.snapshot_times = snapshot_schedule(r.mu(), eps, sc.t_end);
    const fs::path dir = fs::path(cfg.output.dir) / eps_label(eps);

    std::size_t steps = 0;
    auto count = [&](double, const Field&) { ++steps; };
    std::vector<Snapshot> snaps;
    double mass0 = 0.0, mass1 = 0.0;
    std::string csv;
    if (cfg.grid.mode == "radial") {
        const RadialGrid g(cfg.grid.N, cfg.grid.R, cfg.grid.Nr);
        const Field u0 = build_u0(g, profile, r.a());
        snaps = run(sc, &r, g, u0, count);
        mass0 = integral(g, snaps.front().field);
        mass1 = integral(g, snaps.back().field);
        if (cfg.write_csv()) csv = snapshots_csv(snaps, g);
    } else {
        const CartesianGrid2D g(cfg.grid.Lx, cfg.grid.Ly, cfg.grid.Nx, cfg.grid.Ny);
        const Field u0 = build_u0(g, profile, r.a());
        snaps = run(sc, &r, g, u0, count);
        mass0 = integral(g, snaps.front().field);
        mass1 = integral(g, snaps.back().field);
        if (cfg.write_csv()) csv = snapshots_csv(snaps, g);
    }
    if (cfg.write_csv()) write_file(dir / "snapshots.csv", csv);
    Json j;
    j["schema_version"] = schema_version;
    j["eps"] = eps;
    j["t_gen"] = clock.t_eps;
    j["t_end"] = sc.t_end;
    j["steps"] = steps;
    j["snapshots"] = snaps.size();
    j["mass_initial"] = mass0;
    j["mass_final"] = mass1;
    j["u_max_final"] = snaps.back().field.max();
    if (cfg.write_json()) write_file(dir / "simulate.json", to_json_text(j));
    write_file(dir / "effective_config.txt", echo_config(cfg));
    out << fmt::format("eps = {:g}: {} steps to t = {:.6g}, {} snapshots in {}\n", eps, steps, sc.t_end,
                       snaps.size(), dir.string());
    return exit_pass;
}

int cmd_envelope(const RunConfig& cfg, std::ostream& out) {
    const double eps = cfg.solver.eps;
    const auto r = make_reaction(cfg);
    const auto profile = make_profile(cfg);
    const auto settings = make_calibration_settings(cfg);
    const fs::path dir = fs::path(cfg.output.dir) / eps_label(eps);
    write_file(dir / "effective_config.txt", echo_config(cfg));

    EnvelopeParams ep;
    ep.eps = eps;
    ep.mu = r.mu();
    ep.m = cfg.solver.m;
    Calibration cal;
    try {
        cal = calibrate_Cstar(ep, profile, r, make_kernel(cfg), settings);
    } catch (const EnvelopeError& e) {
        Json j;
        j["schema_version"] = schema_version;
        j["eps"] = eps;
        j["Cstar"] = nullptr;
        j["error"] = e.what();
        if (cfg.write_json()) write_file(dir / "calibration.json", to_json_text(j));
        out << "calibration failed: " << e.what() << "\n";
        return exit_check_failed;
    }
    const Envelope env(cal.params, profile, r, cal.kernel);
    if (cfg.write_csv()) {
        std::string csv = "x,t,w_minus,w_plus,L_minus,L_plus\n";
        const std::size_t ns = settings.space_samples, nt = settings.time_samples;
        const double rho_max = settings.sample_radius_factor * profile.R0;
        for (std::size_t jt = 0; jt < nt; ++jt) {
            const double t = env.t_eps() * static_cast<double>(jt) / static_cast<double>(nt - 1);
            for (std::size_t i = 0; i < ns; ++i) {
                const double rho = rho_max * (static_cast<double>(i) + 0.5) / static_cast<double>(ns);
                const std::string Lm =
                    env.xi(rho, t, Side::minus) > 0.0 ? fmt_real(env.residual_L(rho, t, Side::minus)) : "";
                csv += fmt::format("{},{},{},{},{},{}\n", fmt_real(rho), fmt_real(t),
                                   fmt_real(env.eval_w(rho, t, Side::minus)),
                                   fmt_real(env.eval_w(rho, t, Side::plus)), Lm,
                                   fmt_real(env.residual_L(rho, t, Side::plus)));
            }
        }
        write_file(dir / "envelope.csv", csv);
    }
    Json j;
    j["schema_version"] = schema_version;
    j["eps"] = eps;
    j["Cstar"] = cal.params.Cstar;
    j["margin_minus"] = cal.margin_minus;
    j["margin_plus"] = cal.margin_plus;
    j["points_minus"] = cal.points_minus;
    j["points_plus"] = cal.points_plus;
    j["rung"] = cal.rung;
    j["xi_max"] = cal.xi_max;
    j["xi_within_C0"] = cal.xi_within_C0;
    j["kernel_C0"] = cal.kernel.C0;
    if (cfg.write_json()) write_file(dir / "calibration.json", to_json_text(j));
    out << fmt::format("eps = {:g}: Cstar = {:g}, margins {:.6g} / {:.6g}\n", eps, cal.params.Cstar,
                       cal.margin_minus, cal.margin_plus);
    return exit_pass;
}

void print_case(const CaseResult& c, std::ostream& out) {
    out << fmt::format("eps = {:g}: {}", c.eps, c.passed() ? "pass" : (c.completed ? "FAIL" : "ERROR"));
    if (c.completed) {
        out << fmt::format("  Cstar = {}  M0 = {}  width = {:.6g}  Cthick = {}  t_min = {}  b = {}  ({:.1f} s)",
                           c.calibration ? fmt::format("{:g}", c.calibration->params.Cstar) : "-",
                           opt_str(c.bands.M0), c.width, opt_str(c.Cthick), opt_str(c.optimality.t_min),
                           opt_str(c.optimality.b_fit), c.runtime_s);
    }
    out << "\n";
    for (const auto& f : c.failures) out << "  [" << f.code << "] " << f.message << "\n";
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    const auto c = run_case(cfg, cfg.solver.eps);
    write_case(cfg, c, fs::path(cfg.output.dir) / eps_label(c.eps));
    print_case(c, out);
    if (!c.completed) return exit_error;
    return c.passed() ? exit_pass : exit_check_failed;
}

int cmd_sweep(const RunConfig& cfg, std::size_t jobs, std::ostream& out) {
    const auto s = run_sweep(cfg, jobs);
    write_sweep(cfg, s);
    for (const auto& c : s.cases) print_case(c, out);
    if (s.width_fit) {
        out << fmt::format("width fit: width = {:.6g} eps, R^2 = {:.6g} ({} points)\n", s.width_fit->C,
                           s.width_fit->r2, s.width_fit->points);
    } else {
        out << s.width_fit_notice << "\n";
    }
    out << fmt::format("b: min {} max {} mean {}; M0 max/min {}\n", opt_str(s.b_min), opt_str(s.b_max),
                       opt_str(s.b_mean), opt_str(s.M0_ratio));
    for (const auto& f : s.failures) out << "  [" << f.code << "] " << f.message << "\n";
    return s.passed() ? exit_pass : exit_check_failed;
}

Json read_json(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    return Json::parse(f);
}

std::string cell(const Json& v) {
    if (v.is_null()) return "-";
    if (v.is_number()) return fmt::format("{:.6g}", v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

int cmd_report(const fs::path& dir, std::ostream& out) {
    std::vector<Json> reports;
    const fs::path sweep = dir / "sweep.json";
    Json sj;
    if (fs::exists(sweep)) {
        sj = read_json(sweep);
        for (const auto& e : sj.at("entries")) reports.push_back(read_json(dir / e.at("report").get<std::string>()));
    } else {
        std::vector<fs::path> paths;
        if (fs::exists(dir / "report.json")) paths.push_back(dir / "report.json");
        if (fs::is_directory(dir)) {
            for (const auto& d : fs::directory_iterator(dir)) {
                if (d.is_directory() && fs::exists(d.path() / "report.json")) paths.push_back(d.path() / "report.json");
            }
        }
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) reports.push_back(read_json(p));
    }
    if (reports.empty()) throw std::runtime_error("no reports under " + dir.string());

    bool ok = true;
    out << fmt::format("{:>10} {:>7} {:>8} {:>10} {:>12} {:>8} {:>12} {:>8} {:>6}\n", "eps", "status", "Cstar", "M0",
                       "width", "Cthick", "t_min", "b_fit", "sandw");
    for (const auto& r : reports) {
        const std::string status = r.value("status", "error");
        ok = ok && status == "pass";
        out << fmt::format("{:>10} {:>7} {:>8} {:>10} {:>12} {:>8} {:>12} {:>8} {:>6}\n", cell(r.at("eps")), status,
                           cell(r.value("Cstar", Json())), cell(r.value("M0", Json())),
                           cell(r.value("width_eta", Json())), cell(r.value("Cthick_fit", Json())),
                           cell(r.value("t_min", Json())), cell(r.value("b_fit", Json())),
                           cell(r.value("sandwich_violations", Json())));
        for (const auto& f : r.value("failures", Json::array())) {
            out << "    [" << f.value("code", "") << "] " << f.value("message", "") << "\n";
        }
    }
    if (!sj.is_null()) {
        ok = ok && sj.value("status", "fail") == "pass";
        const auto& wf = sj.at("width_fit");
        if (wf.contains("C")) {
            out << fmt::format("width fit: C = {}, R^2 = {}\n", cell(wf.at("C")), cell(wf.at("r2")));
        } else {
            out << cell(wf.at("notice")) << "\n";
        }
        out << fmt::format("b: min {} max {} (cap {}); M0 max/min {}\n", cell(sj.at("b").at("min")),
                           cell(sj.at("b").at("max")), cell(sj.at("b").at("cap")), cell(sj.at("M0_ratio")));
        for (const auto& f : sj.at("failures")) out << "  [" << f.value("code", "") << "] " << f.value("message", "") << "\n";
    }
    return ok ? exit_pass : exit_check_failed;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Generation-of-interface experiments for u_t = Lap(u^m) + f(u)/eps^2", "layergen"};
    app.require_subcommand(1);

    Common c_ode, c_sim, c_env, c_ver, c_swp;
    double tau_max = 0.0;
    std::size_t n_tau = 50, n_xi = 41, samples = 1000, jobs = 1;
    std::string report_dir;

    auto* ode = app.add_subcommand("ode", "reaction flow Y and its sensitivities; kernel checks");
    add_common(ode, c_ode);
    ode->add_option("--tau-max", tau_max, "largest tau (default |ln 0.005| / mu)");
    ode->add_option("--n-tau", n_tau, "tau samples per trajectory")->check(CLI::PositiveNumber);
    ode->add_option("--n-xi", n_xi, "initial values in (-C0, C0)")->check(CLI::PositiveNumber);
    ode->add_option("--samples", samples, "samples for the curvature bound")->check(CLI::PositiveNumber);

    auto* sim = app.add_subcommand("simulate", "run the solver and write snapshots");
    add_common(sim, c_sim);
    auto* env = app.add_subcommand("envelope-check", "calibrate Cstar and tabulate the barriers");
    add_common(env, c_env);
    auto* ver = app.add_subcommand("verify", "full verification for solver.eps");
    add_common(ver, c_ver);
    auto* swp = app.add_subcommand("sweep", "verification over sweep.eps_list");
    add_common(swp, c_swp);
    swp->add_option("-j,--jobs", jobs, "concurrent eps values")->check(CLI::PositiveNumber);
    auto* rep = app.add_subcommand("report", "summarise reports written by verify or sweep");
    rep->add_option("-i,--in", report_dir, "output directory to read")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_pass;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return exit_error;
    }

    try {
        if (*ode) {
            const auto cfg = load(c_ode);
            const double tm = tau_max > 0.0 ? tau_max : std::abs(std::log(0.005)) / make_reaction(cfg).mu();
            return cmd_ode(cfg, tm, n_tau, n_xi, samples, out);
        }
        if (*sim) return cmd_simulate(load(c_sim), out);
        if (*env) return cmd_envelope(load(c_env), out);
        if (*ver) return cmd_verify(load(c_ver), out);
        if (*swp) return cmd_sweep(load(c_swp), jobs, out);
        if (*rep) return cmd_report(report_dir, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}

} // namespace layergen::cli
