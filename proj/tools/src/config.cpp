#include <layergen/cli/config.hpp>

#include <layergen/envelope.hpp>
#include <layergen/geometry.hpp>
#include <layergen/ode_kernel.hpp>
#include <layergen/reaction.hpp>
#include <layergen/solver.hpp>
#include <layergen/verify.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace layergen::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& key, const std::string& raw) {
    std::string v = trim(raw);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
        if (v.back() != v.front()) throw ConfigError(key, "unterminated string " + v);
        return v.substr(1, v.size() - 2);
    }
    return v;
}

double to_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || p != end || !std::isfinite(out)) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    return out;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    Int out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc() || p != end) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
    return out;
}

std::vector<double> to_list(const std::string& key, const std::string& raw) {
    std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError(key, "unterminated list " + v);
        v = v.substr(1, v.size() - 2);
    }
    std::vector<double> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
    return out;
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

struct Entry {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Entry real_entry(T RunConfig::*group, double T::*field) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*group).*field = to_double(k, v); },
            [=](const RunConfig& c) { return num((c.*group).*field); }};
}

template <class T>
Entry int_entry(T RunConfig::*group, int T::*field) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) {
                (c.*group).*field = to_integer<int>(k, v);
            },
            [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <class T>
Entry size_entry(T RunConfig::*group, std::size_t T::*field) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) {
                (c.*group).*field = to_integer<std::size_t>(k, v);
            },
            [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <class T>
Entry string_entry(T RunConfig::*group, std::string T::*field) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*group).*field = unquote(k, v); },
            [=](const RunConfig& c) { return "\"" + (c.*group).*field + "\""; }};
}

using Registry = std::vector<std::pair<std::string, Entry>>;

const Registry& registry() {
    using R = RunConfig;
    static const Registry reg = [] {
        Registry r;
        r.emplace_back("reaction.kind", string_entry(&R::reaction, &decltype(R::reaction)::kind));
        r.emplace_back("reaction.a", real_entry(&R::reaction, &decltype(R::reaction)::a));
        r.emplace_back("reaction.delta", real_entry(&R::reaction, &decltype(R::reaction)::delta));
        r.emplace_back("grid.mode", string_entry(&R::grid, &decltype(R::grid)::mode));
        r.emplace_back("grid.N", int_entry(&R::grid, &decltype(R::grid)::N));
        r.emplace_back("grid.R", real_entry(&R::grid, &decltype(R::grid)::R));
        r.emplace_back("grid.Nr", size_entry(&R::grid, &decltype(R::grid)::Nr));
        r.emplace_back("grid.Nx", size_entry(&R::grid, &decltype(R::grid)::Nx));
        r.emplace_back("grid.Ny", size_entry(&R::grid, &decltype(R::grid)::Ny));
        r.emplace_back("grid.Lx", real_entry(&R::grid, &decltype(R::grid)::Lx));
        r.emplace_back("grid.Ly", real_entry(&R::grid, &decltype(R::grid)::Ly));
        r.emplace_back("profile.c0", real_entry(&R::profile, &decltype(R::profile)::c0));
        r.emplace_back("profile.R0", real_entry(&R::profile, &decltype(R::profile)::R0));
        r.emplace_back("solver.m", int_entry(&R::solver, &decltype(R::solver)::m));
        r.emplace_back("solver.eps", real_entry(&R::solver, &decltype(R::solver)::eps));
        r.emplace_back("solver.cfl_safety", real_entry(&R::solver, &decltype(R::solver)::cfl_safety));
        r.emplace_back("solver.t_end_factor", real_entry(&R::solver, &decltype(R::solver)::t_end_factor));
        r.emplace_back("kernel.tol", real_entry(&R::kernel, &decltype(R::kernel)::tol));
        r.emplace_back("kernel.dtau_max", real_entry(&R::kernel, &decltype(R::kernel)::dtau_max));
        r.emplace_back("envelope.space_samples",
                       size_entry(&R::envelope, &decltype(R::envelope)::space_samples));
        r.emplace_back("envelope.time_samples", size_entry(&R::envelope, &decltype(R::envelope)::time_samples));
        r.emplace_back("verify.gamma", real_entry(&R::verify, &decltype(R::verify)::gamma));
        r.emplace_back("verify.eta", real_entry(&R::verify, &decltype(R::verify)::eta));
        r.emplace_back("verify.sandwich_tol", real_entry(&R::verify, &decltype(R::verify)::sandwich_tol));
        r.emplace_back("sweep.eps_list",
                       Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.sweep.eps_list = to_list(k, v);
                             },
                             [](const RunConfig& c) {
                                 std::string s = "[";
                                 for (std::size_t i = 0; i < c.sweep.eps_list.size(); ++i) {
                                     if (i) s += ", ";
                                     s += num(c.sweep.eps_list[i]);
                                 }
                                 return s + "]";
                             }});
        r.emplace_back("output.dir", string_entry(&R::output, &decltype(R::output)::dir));
        r.emplace_back("output.format", string_entry(&R::output, &decltype(R::output)::format));
        r.emplace_back("seed", Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
                                         c.seed = to_integer<std::uint64_t>(k, v);
                                     },
                                     [](const RunConfig& c) { return std::to_string(c.seed); }});
        return r;
    }();
    return reg;
}

const Entry& lookup(const std::string& key) {
    for (const auto& [k, e] : registry()) {
        if (k == key) return e;
    }
    throw ConfigError(key, "unknown key");
}

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

// Re-throws a module error under a key path.
template <class F>
void checked(const char* key, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, e] : registry()) k.push_back(name);
        return k;
    }();
    return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    lookup(key).set(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside quotes
        bool quoted = false;
        char q = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == q) quoted = false;
            } else if (c == '"' || c == '\'') {
                quoted = true;
                q = c;
            } else if (c == '#') {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno), "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
        set_key(cfg, key, line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("config", "cannot read " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        cfg = parse_config_text(ss.str(), path);
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(o, "override must be key=value");
        set_key(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
}

namespace {

// The key a failing profile check should be reported under.
const char* profile_key(const InitialProfile& p, double a) { return p.c0 > a ? "profile.R0" : "profile.c0"; }

} // namespace

void validate(const RunConfig& cfg) {
    require(cfg.reaction.kind == "cubic", "reaction.kind", "only 'cubic' is supported");
    require(cfg.reaction.a > 0.0 && cfg.reaction.a < 1.0, "reaction.a", "must lie in (0, 1)");
    require(cfg.reaction.delta >= 0.0, "reaction.delta", "must be nonnegative");
    const auto base = BistableReaction::cubic(cfg.reaction.a);
    double a_eff = cfg.reaction.a;
    if (cfg.reaction.delta != 0.0) {
        checked("reaction.delta", [&] { a_eff = perturb(base, cfg.reaction.delta).a_delta; });
    }

    require(cfg.grid.mode == "radial" || cfg.grid.mode == "cartesian2d", "grid.mode",
            "must be 'radial' or 'cartesian2d'");
    if (cfg.grid.mode == "radial") {
        require(cfg.grid.N >= 2, "grid.N", "must be at least 2");
        require(cfg.grid.R > 0.0, "grid.R", "must be positive");
        require(cfg.grid.Nr >= 16, "grid.Nr", "must be at least 16");
        checked("grid", [&] { RadialGrid(cfg.grid.N, cfg.grid.R, cfg.grid.Nr); });
        require(cfg.grid.Nr % 8 == 0, "grid.Nr", "must be divisible by 8 (coarse verification ladder)");
        InitialProfile p{cfg.profile.c0, cfg.profile.R0, cfg.grid.N, {0.0, 0.0}};
        checked(profile_key(p, a_eff), [&] { p.validate(a_eff, cfg.grid.R); });
    } else {
        require(cfg.grid.Nx >= 16, "grid.Nx", "must be at least 16");
        require(cfg.grid.Ny >= 16, "grid.Ny", "must be at least 16");
        checked("grid.Lx", [&] { CartesianGrid2D(cfg.grid.Lx, cfg.grid.Ly, cfg.grid.Nx, cfg.grid.Ny); });
        require(cfg.grid.Nx % 8 == 0 && cfg.grid.Ny % 8 == 0, "grid.Nx",
                "Nx and Ny must be divisible by 8 (coarse verification ladder)");
        InitialProfile p{cfg.profile.c0, cfg.profile.R0, 2, {0.5 * cfg.grid.Lx, 0.5 * cfg.grid.Ly}};
        checked(profile_key(p, a_eff), [&] { p.validate(a_eff, 0.5 * std::min(cfg.grid.Lx, cfg.grid.Ly)); });
    }

    require(cfg.solver.m >= 2, "solver.m", "must be at least 2");
    require(cfg.solver.eps > 0.0 && cfg.solver.eps < 1.0, "solver.eps", "must lie in (0, 1)");
    require(cfg.solver.cfl_safety > 0.0 && cfg.solver.cfl_safety <= 1.0, "solver.cfl_safety",
            "must lie in (0, 1]");
    require(cfg.solver.t_end_factor >= 1.0, "solver.t_end_factor", "must be at least 1 (runs reach t_eps)");

    KernelConfig k;
    k.tol = cfg.kernel.tol;
    k.dtau_max = cfg.kernel.dtau_max;
    checked("kernel", [&] { k.validate(); });
    require(cfg.envelope.space_samples >= 2, "envelope.space_samples", "must be at least 2");
    require(cfg.envelope.time_samples >= 2, "envelope.time_samples", "must be at least 2");
    require(cfg.envelope.space_samples * cfg.envelope.time_samples >= 1000, "envelope.space_samples",
            "space x time samples must be at least 1000");

    const double lim = std::min(a_eff, 1.0 - a_eff);
    require(cfg.verify.gamma > 0.0 && cfg.verify.gamma < lim, "verify.gamma", "must lie in (0, min(a, 1-a))");
    require(cfg.verify.eta > 0.0 && cfg.verify.eta < lim, "verify.eta", "must lie in (0, min(a, 1-a))");
    require(cfg.verify.sandwich_tol >= 0.0, "verify.sandwich_tol", "must be nonnegative");

    require(!cfg.sweep.eps_list.empty(), "sweep.eps_list", "must not be empty");
    for (double e : cfg.sweep.eps_list) {
        require(e > 0.0 && e < 1.0, "sweep.eps_list", "every entry must lie in (0, 1)");
    }
    std::set<double> uniq(cfg.sweep.eps_list.begin(), cfg.sweep.eps_list.end());
    require(uniq.size() == cfg.sweep.eps_list.size(), "sweep.eps_list", "entries must be distinct");

    require(!cfg.output.dir.empty(), "output.dir", "must not be empty");
    require(cfg.output.format == "csv" || cfg.output.format == "json" || cfg.output.format == "csv+json",
            "output.format", "must be 'csv', 'json' or 'csv+json'");
}

std::string echo_config(const RunConfig& cfg) {
    std::string out = fmt::format("# schema_version {}\n", schema_version);
    for (const auto& [k, e] : registry()) out += k + " = " + e.get(cfg) + "\n";
    return out;
}

} // namespace layergen::cli
