#include <layergen/verify.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace layergen {

void VerifyParams::validate(double a) const {
    if (!(gamma > 0.0 && gamma < std::min(a, 1.0 - a))) {
        throw VerifyError("verify.gamma must lie in (0, min(a, 1 - a))");
    }
    if (!(eta > 0.0 && eta < 0.5)) throw VerifyError("verify.eta must lie in (0, 1/2)");
    if (!(sandwich_tol >= 0.0)) throw VerifyError("verify.sandwich_tol must be nonnegative");
    if (!(M0_step > 0.0) || M0_rungs == 0) throw VerifyError("M0 ladder is empty");
    if (!(C_step > 0.0) || C_rungs == 0) throw VerifyError("thickness ladder is empty");
}

namespace {

template <class RhoOf>
SandwichResult sandwich_impl(std::span<const Snapshot> snapshots, std::size_t n, RhoOf rho_of,
                             const Envelope& env, double tol) {
    SandwichResult res;
    res.worst_margin = std::numeric_limits<double>::infinity();
    const double t_eps = env.t_eps() * (1.0 + 1e-12);
    for (const auto& s : snapshots) {
        if (s.t > t_eps) continue;
        if (s.field.size() != n) throw VerifyError("snapshot size does not match grid");
        ++res.snapshots;
        for (std::size_t i = 0; i < n; ++i) {
            const double rho = rho_of(i);
            const double lo = env.eval_w(rho, s.t, Side::minus);
            const double hi = env.eval_w(rho, s.t, Side::plus);
            const double u = s.field[i];
            const double margin = std::min(u - lo, hi - u);
            ++res.checked;
            if (margin < -tol) ++res.violations;
            if (margin < res.worst_margin) {
                res.worst_margin = margin;
                res.worst_t = s.t;
                res.worst_rho = rho;
            }
        }
    }
    if (res.checked == 0) res.worst_margin = 0.0;
    return res;
}

std::optional<double> ladder_rung(double needed, double step, std::size_t rungs) {
    // smallest k * step strictly above `needed`
    const double k = std::floor(needed / step) + 1.0;
    const double k_min = std::max(k, 1.0);
    if (k_min > static_cast<double>(rungs)) return std::nullopt;
    return k_min * step;
}

// Crossing radius where u passes `level` between centres i-1 and i.
double crossing(const RadialGrid& g, const Field& u, std::size_t i, double level) {
    const double a = u[i - 1], b = u[i];
    const double t = (a - level) / (a - b);
    return g.centers[i - 1] + t * (g.centers[i] - g.centers[i - 1]);
}

struct RayWidth {
    double r_in;
    double r_out;
};

template <class Sample>
std::optional<RayWidth> width_along(Sample sample, double r_max, double dr, double eta) {
    const double hi = 1.0 - eta;
    const auto n = static_cast<std::size_t>(std::floor(r_max / dr));
    if (n < 2) return std::nullopt;
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = sample(static_cast<double>(k) * dr);
    if (!(v[0] >= hi)) return std::nullopt;
    std::optional<double> r_in, r_out;
    for (std::size_t k = 1; k <= n; ++k) {
        if (v[k] < hi) {
            r_in = dr * (static_cast<double>(k - 1) + (v[k - 1] - hi) / (v[k - 1] - v[k]));
            break;
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        if (v[k] > eta) {
            if (k == n) break;
            r_out = dr * (static_cast<double>(k) + (v[k] - eta) / (v[k] - v[k + 1]));
            break;
        }
    }
    if (!r_in || !r_out) return std::nullopt;
    return RayWidth{*r_in, *r_out};
}

} // namespace

SandwichResult sandwich_check(std::span<const Snapshot> snapshots, const RadialGrid& grid,
                              const Envelope& env, double tol) {
    return sandwich_impl(snapshots, grid.size(), [&](std::size_t i) { return grid.centers[i]; }, env, tol);
}

SandwichResult sandwich_check(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid,
                              const Envelope& env, double tol) {
    const Point2 c = env.profile().center;
    return sandwich_impl(
        snapshots, grid.size(),
        [&](std::size_t k) { return std::hypot(grid.x(k % grid.Nx) - c[0], grid.y(k / grid.Nx) - c[1]); }, env,
        tol);
}

bool bands_hold(const Field& u, const Field& u0, double a, double eps, double gamma, double M0) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u0[i] >= a + M0 * eps && u[i] < 1.0 - gamma) return false;
        if (u0[i] <= a - M0 * eps && u[i] > gamma) return false;
    }
    return true;
}

BandResult classify_bands(const Field& u, const Field& u0, double a, double eps, const VerifyParams& vp) {
    if (u.size() != u0.size()) throw VerifyError("field sizes differ");
    BandResult res;
    res.u_min = std::numeric_limits<double>::infinity();
    res.u_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        res.u_min = std::min(res.u_min, v);
        res.u_max = std::max(res.u_max, v);
        if (!(v >= 0.0 && v <= 1.0 + vp.gamma)) ++res.bound_violations;
        const double d = (u0[i] - a) / eps;
        if (d > 0.0 && v < 1.0 - vp.gamma) res.M0_needed = std::max(res.M0_needed, d);
        if (d < 0.0 && v > vp.gamma) res.M0_needed = std::max(res.M0_needed, -d);
    }
    res.bounds_ok = res.bound_violations == 0;
    res.M0 = ladder_rung(res.M0_needed, vp.M0_step, vp.M0_rungs);
    return res;
}

double measure_width(const Field& u, const RadialGrid& grid, double eta) {
    if (u.size() != grid.size()) throw VerifyError("field size does not match grid");
    const double hi = 1.0 - eta;
    const std::size_t n = grid.size();
    if (!(u[0] >= hi)) throw VerifyError("layer-not-found: u < 1 - eta at the centre");
    std::optional<double> r_in, r_out;
    for (std::size_t i = 1; i < n; ++i) {
        if (u[i] < hi) {
            r_in = crossing(grid, u, i, hi);
            break;
        }
    }
    for (std::size_t i = n; i-- > 1;) {
        if (u[i - 1] > eta) {
            if (i == n) break;  // never drops below eta
            r_out = crossing(grid, u, i, eta);
            break;
        }
    }
    if (!r_in || !r_out || u[n - 1] > eta) throw VerifyError("layer-not-found: profile does not cross both levels");
    return std::max(0.0, *r_out - *r_in);
}

double measure_width(const Field& u, const CartesianGrid2D& grid, Point2 center, double eta, std::size_t rays) {
    if (u.size() != grid.size()) throw VerifyError("field size does not match grid");
    if (rays == 0) throw VerifyError("need at least one ray");
    const double h = grid.h;
    const double room = std::min({center[0], grid.Lx - center[0], center[1], grid.Ly - center[1]});
    double sum = 0.0;
    for (std::size_t k = 0; k < rays; ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(rays);
        const double cx = std::cos(th), cy = std::sin(th);
        auto w = width_along(
            [&](double r) { return sample_bilinear(u, grid, {center[0] + r * cx, center[1] + r * cy}); }, room,
                             0.25 * h, eta);
        if (!w) throw VerifyError("layer-not-found along a ray");
        sum += std::max(0.0, w->r_out - w->r_in);
    }
    return sum / static_cast<double>(rays);
}

ThreeBandResult three_band(const Field& u, std::span<const double> signed_dist, double eps, double eta) {
    if (u.size() != signed_dist.size()) throw VerifyError("distance size does not match field");
    ThreeBandResult res;
    res.near_ok = true;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        const double d = signed_dist[i];
        if (!(v >= 0.0 && v <= 1.0 + eta)) {
            // fails every region; no constant rescues it
            res.near_ok = false;
            continue;
        }
        const bool outer_ok = v <= eta;
        const bool inner_ok = v >= 1.0 - eta;
        if ((d > 0.0 && !outer_ok) || (d <= 0.0 && !inner_ok)) res.C_needed = std::max(res.C_needed, std::abs(d) / eps);
    }
    return res;
}

bool three_band_holds(const Field& u, std::span<const double> signed_dist, double eps, double eta, double C) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i];
        const double d = signed_dist[i];
        if (!(v >= 0.0 && v <= 1.0 + eta)) return false;
        if (std::abs(d) < C * eps) continue;
        if (d > 0.0 ? v > eta : v < 1.0 - eta) return false;
    }
    return true;
}

std::optional<double> fit_thickness_constant(const Field& u, std::span<const double> signed_dist, double eps,
                                             const VerifyParams& vp) {
    const auto tb = three_band(u, signed_dist, eps, vp.eta);
    if (!tb.near_ok) return std::nullopt;
    return ladder_rung(tb.C_needed, vp.C_step, vp.C_rungs);
}

double sample_radial(const Field& u, const RadialGrid& grid, double r) {
    if (u.size() != grid.size()) throw VerifyError("field size does not match grid");
    const std::size_t n = grid.size();
    if (r <= grid.centers[0]) return u[0];
    if (r >= grid.centers[n - 1]) return u[n - 1];
    const double f = r / grid.dr - 0.5;
    const auto i = std::min(static_cast<std::size_t>(f), n - 2);
    const double t = f - static_cast<double>(i);
    return (1.0 - t) * u[i] + t * u[i + 1];
}

double sample_bilinear(const Field& u, const CartesianGrid2D& grid, Point2 x) {
    if (u.size() != grid.size()) throw VerifyError("field size does not match grid");
    const double fx = std::clamp(x[0] / grid.h - 0.5, 0.0, static_cast<double>(grid.Nx - 1));
    const double fy = std::clamp(x[1] / grid.h - 0.5, 0.0, static_cast<double>(grid.Ny - 1));
    const auto i = std::min(static_cast<std::size_t>(fx), grid.Nx - 2);
    const auto j = std::min(static_cast<std::size_t>(fy), grid.Ny - 2);
    const double tx = fx - static_cast<double>(i), ty = fy - static_cast<double>(j);
    return (1 - tx) * (1 - ty) * u[grid.index(i, j)] + tx * (1 - ty) * u[grid.index(i + 1, j)] +
           (1 - tx) * ty * u[grid.index(i, j + 1)] + tx * ty * u[grid.index(i + 1, j + 1)];
}

std::vector<double> signed_distances(const RadialGrid& grid, double r0) {
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) d[i] = dist_to_gamma0(r0, grid.centers[i]);
    return d;
}

std::vector<double> signed_distances(const CartesianGrid2D& grid, const std::vector<Segment>& gamma0,
                                     const InitialProfile& profile, double a) {
    std::vector<double> d(grid.size());
    for (std::size_t j = 0; j < grid.Ny; ++j) {
        for (std::size_t i = 0; i < grid.Nx; ++i) {
            d[grid.index(i, j)] = dist_to_gamma0(gamma0, profile, a, {grid.x(i), grid.y(j)});
        }
    }
    return d;
}

namespace {

template <class Probe>
OptimalityResult scan_impl(std::span<const Snapshot> snapshots, std::size_t n, const Field& u0,
                           std::span<const double> dist, double a, double eps, double mu, double M0, double C,
                           double probe_time, const VerifyParams& vp, Probe probe_value) {
    OptimalityResult res;
    const double t_eps = generation_time(mu, eps) * (1.0 + 1e-12);
    std::vector<const Snapshot*> order;
    for (const auto& s : snapshots) {
        if (s.field.size() != n) throw VerifyError("snapshot size does not match grid");
        order.push_back(&s);
    }
    std::stable_sort(order.begin(), order.end(), [](const Snapshot* x, const Snapshot* y) { return x->t < y->t; });

    for (const Snapshot* s : order) {
        if (s->t > t_eps) break;
        if (bands_hold(s->field, u0, a, eps, vp.gamma, M0) && three_band_holds(s->field, dist, eps, vp.eta, C)) {
            res.t_min = s->t;
            res.b_fit = std::abs(std::log(eps)) - mu * s->t / (eps * eps);
            break;
        }
    }

    const Snapshot* probe = nullptr;
    for (const Snapshot* s : order) {
        if (!probe || std::abs(s->t - probe_time) < std::abs(probe->t - probe_time)) probe = s;
    }
    if (probe) {
        res.probe_t = probe->t;
        res.probe_u = probe_value(probe->field);
        res.probe_below = res.probe_u < 1.0 - vp.eta;
    }
    return res;
}

} // namespace

OptimalityResult optimality_scan(std::span<const Snapshot> snapshots, const RadialGrid& grid, const Field& u0,
                                 double r0, double a, double eps, double mu, double M0, double C, double probe_time,
                                 const VerifyParams& vp) {
    const auto dist = signed_distances(grid, r0);
    return scan_impl(snapshots, grid.size(), u0, dist, a, eps, mu, M0, C, probe_time, vp,
                     [&](const Field& u) { return sample_radial(u, grid, r0 - C * eps); });
}

OptimalityResult optimality_scan(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid,
                                 const Field& u0, const std::vector<Segment>& gamma0, const InitialProfile& profile,
                                 double r0, double a, double eps, double mu, double M0, double C,
                                 double probe_time, const VerifyParams& vp) {
    const auto dist = signed_distances(grid, gamma0, profile, a);
    const Point2 x{profile.center[0] + r0 - C * eps, profile.center[1]};
    return scan_impl(snapshots, grid.size(), u0, dist, a, eps, mu, M0, C, probe_time, vp,
                     [&](const Field& u) { return sample_bilinear(u, grid, x); });
}

// ---------------------------------------------------------------------------

std::vector<TestFunction> radial_test_functions(const RadialGrid& grid) {
    const double R2 = grid.R * grid.R;
    const double N = grid.dim;
    struct Poly {
        const char* name;
        double (*phi)(double);
        double (*phi_s)(double);
        double (*phi_ss)(double);
    };
    const Poly polys[] = {
        {"one", [](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }},
        {"s-s2/2", [](double s) { return s - 0.5 * s * s; }, [](double s) { return 1.0 - s; },
         [](double) { return -1.0; }},
        {"s2-2s3/3", [](double s) { return s * s - 2.0 / 3.0 * s * s * s; },
         [](double s) { return 2.0 * s - 2.0 * s * s; }, [](double s) { return 2.0 - 4.0 * s; }},
    };
    std::vector<TestFunction> out;
    for (const auto& p : polys) {
        TestFunction tf{p.name, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r = grid.centers[i];
            const double s = r * r / R2;
            tf.phi[i] = p.phi(s);
            // Lap phi(s(r)) = (4 s phi_ss + 2 N phi_s) / R^2
            tf.laplacian[i] = (4.0 * s * p.phi_ss(s) + 2.0 * N * p.phi_s(s)) / R2;
        }
        out.push_back(std::move(tf));
    }
    return out;
}

std::vector<TestFunction> box_test_functions(const CartesianGrid2D& grid) {
    const double kx = std::numbers::pi / grid.Lx, ky = std::numbers::pi / grid.Ly;
    struct Mode {
        const char* name;
        int px, py;
    };
    const Mode modes[] = {{"one", 0, 0}, {"cos-x", 1, 0}, {"cos-x-cos-y", 1, 1}, {"cos-2y", 0, 2}};
    std::vector<TestFunction> out;
    for (const auto& md : modes) {
        TestFunction tf{md.name, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
        const double lam = -(md.px * kx) * (md.px * kx) - (md.py * ky) * (md.py * ky);
        for (std::size_t j = 0; j < grid.Ny; ++j) {
            for (std::size_t i = 0; i < grid.Nx; ++i) {
                const double v = std::cos(md.px * kx * grid.x(i)) * std::cos(md.py * ky * grid.y(j));
                tf.phi[grid.index(i, j)] = v;
                tf.laplacian[grid.index(i, j)] = lam * v;
            }
        }
        out.push_back(std::move(tf));
    }
    return out;
}

WeakResidualAccumulator::WeakResidualAccumulator(std::vector<double> volumes, std::vector<TestFunction> tests,
                                                 const BistableReaction* reaction, int m, double eps)
    : volumes_(std::move(volumes)), tests_(std::move(tests)), m_(m), inv_eps2_(1.0 / (eps * eps)) {
    if (reaction) reaction_.emplace(*reaction);
    if (!(eps > 0.0)) throw VerifyError("eps must be positive");
    for (const auto& tf : tests_) {
        if (tf.phi.size() != volumes_.size() || tf.laplacian.size() != volumes_.size()) {
            throw VerifyError("test function " + tf.name + " does not match the grid");
        }
    }
    const std::size_t k = tests_.size();
    diff_integral_.assign(k, 0.0);
    react_integral_.assign(k, 0.0);
}

std::vector<double> WeakResidualAccumulator::moments(const Field& u, std::vector<double>& diffusion,
                                                     std::vector<double>& reaction) const {
    const std::size_t k = tests_.size();
    std::vector<double> mass(k, 0.0);
    diffusion.assign(k, 0.0);
    reaction.assign(k, 0.0);
    for (std::size_t i = 0; i < volumes_.size(); ++i) {
        const double v = u[i];
        double um = v;
        for (int p = 1; p < m_; ++p) um *= v;
        const double fv = reaction_ ? reaction_->eval(v) : 0.0;
        const double w = volumes_[i];
        for (std::size_t q = 0; q < k; ++q) {
            mass[q] += w * v * tests_[q].phi[i];
            diffusion[q] += w * um * tests_[q].laplacian[i];
            reaction[q] += w * fv * tests_[q].phi[i];
        }
    }
    return mass;
}

void WeakResidualAccumulator::add(double t, const Field& u) {
    if (u.size() != volumes_.size()) throw VerifyError("field size does not match the grid");
    std::vector<double> diff, react;
    auto mass = moments(u, diff, react);
    if (!started_) {
        initial_ = mass;
        started_ = true;
    } else {
        if (t < t_prev_) throw VerifyError("weak residual states must arrive in time order");
        const double dt = t - t_prev_;
        for (std::size_t q = 0; q < tests_.size(); ++q) {
            diff_integral_[q] += 0.5 * dt * (diff_prev_[q] + diff[q]);
            react_integral_[q] += 0.5 * dt * (react_prev_[q] + react[q]);
        }
    }
    current_ = std::move(mass);
    diff_prev_ = std::move(diff);
    react_prev_ = std::move(react);
    t_prev_ = t;
}

std::vector<double> WeakResidualAccumulator::residuals() const {
    if (!started_) throw VerifyError("no states accumulated");
    std::vector<double> out(tests_.size());
    for (std::size_t q = 0; q < tests_.size(); ++q) {
        out[q] = std::abs(current_[q] - initial_[q] - diff_integral_[q] - inv_eps2_ * react_integral_[q]);
    }
    return out;
}

std::vector<double> weak_residual(std::span<const Snapshot> snapshots, const RadialGrid& grid,
                                  const std::vector<TestFunction>& tests, const BistableReaction* reaction, int m,
                                  double eps) {
    WeakResidualAccumulator acc(grid.volumes, tests, reaction, m, eps);
    for (const auto& s : snapshots) acc.add(s.t, s.field);
    return acc.residuals();
}

// ---------------------------------------------------------------------------

Field solve_radial(const RadialProblem& problem, std::size_t Nr, double t) {
    const RadialGrid grid(problem.dim, problem.R, Nr);
    InitialProfile prof = problem.profile;
    prof.dim = problem.dim;
    const Field u0 = build_u0(grid, prof, problem.reaction.a());
    SolverConfig cfg = problem.solver;
    cfg.t_end = t;
    cfg.snapshot_times = {t};
    auto snaps = run(cfg, problem.with_reaction ? &problem.reaction : nullptr, grid, u0);
    return snaps.back().field;
}

Field restrict_radial(const Field& fine, const RadialGrid& fine_grid, const RadialGrid& coarse_grid) {
    if (fine.size() != fine_grid.size()) throw VerifyError("field size does not match grid");
    if (fine_grid.Nr % coarse_grid.Nr != 0 || fine_grid.dim != coarse_grid.dim) {
        throw VerifyError("grids are not nested");
    }
    const std::size_t k = fine_grid.Nr / coarse_grid.Nr;
    Field out{std::vector<double>(coarse_grid.Nr, 0.0)};
    for (std::size_t j = 0; j < coarse_grid.Nr; ++j) {
        double mass = 0.0, vol = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            const std::size_t i = j * k + l;
            mass += fine_grid.volumes[i] * fine[i];
            vol += fine_grid.volumes[i];
        }
        out[j] = mass / vol;
    }
    return out;
}

Field restrict_box(const Field& fine, const CartesianGrid2D& fine_grid, const CartesianGrid2D& coarse_grid) {
    if (fine.size() != fine_grid.size()) throw VerifyError("field size does not match grid");
    if (fine_grid.Nx % coarse_grid.Nx != 0 || fine_grid.Ny % coarse_grid.Ny != 0 ||
        fine_grid.Nx / coarse_grid.Nx != fine_grid.Ny / coarse_grid.Ny) {
        throw VerifyError("grids are not nested");
    }
    const std::size_t k = fine_grid.Nx / coarse_grid.Nx;
    Field out{std::vector<double>(coarse_grid.size(), 0.0)};
    for (std::size_t j = 0; j < fine_grid.Ny; ++j) {
        for (std::size_t i = 0; i < fine_grid.Nx; ++i) {
            out[coarse_grid.index(i / k, j / k)] += fine[fine_grid.index(i, j)];
        }
    }
    const double inv = 1.0 / static_cast<double>(k * k);
    for (double& v : out.values) v *= inv;
    return out;
}

double l1_distance(const RadialGrid& grid, const Field& a, const Field& b) {
    if (a.size() != grid.size() || b.size() != grid.size()) throw VerifyError("field size does not match grid");
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.volumes[i] * std::abs(a[i] - b[i]);
    return s;
}

double linf_distance(const Field& a, const Field& b) {
    if (a.size() != b.size()) throw VerifyError("field sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

std::vector<double> convergence_orders(std::span<const double> errors, std::span<const double> refinement) {
    if (errors.size() != refinement.size()) throw VerifyError("errors and refinement differ in length");
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        out.push_back(std::log(errors[i] / errors[i + 1]) / std::log(refinement[i + 1] / refinement[i]));
    }
    return out;
}

ConvergenceResult convergence_study(const RadialProblem& problem, std::span<const std::size_t> ladder,
                                    std::size_t reference_Nr, double t) {
    if (ladder.empty()) throw VerifyError("empty resolution ladder");
    const RadialGrid ref_grid(problem.dim, problem.R, reference_Nr);
    const Field ref = solve_radial(problem, reference_Nr, t);
    ConvergenceResult res;
    std::vector<double> errors, refinement;
    for (std::size_t Nr : ladder) {
        if (Nr >= reference_Nr) throw VerifyError("ladder resolutions must be coarser than the reference");
        const RadialGrid grid(problem.dim, problem.R, Nr);
        const Field u = solve_radial(problem, Nr, t);
        const Field r = restrict_radial(ref, ref_grid, grid);
        ConvergenceLevel lvl{Nr, l1_distance(grid, u, r), linf_distance(u, r)};
        errors.push_back(lvl.error_l1);
        refinement.push_back(static_cast<double>(Nr));
        res.levels.push_back(lvl);
    }
    res.orders = convergence_orders(errors, refinement);
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (!(errors[i + 1] < errors[i])) res.monotone = false;
    }
    return res;
}

} // namespace layergen
