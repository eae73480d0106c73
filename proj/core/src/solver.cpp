#include <layergen/solver.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace layergen {

void SolverConfig::validate() const {
    if (m < 2) throw SolverError("solver.m must be at least 2");
    if (!(eps > 0.0)) throw SolverError("solver.eps must be positive");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw SolverError("solver.cfl_safety must lie in (0, 1]");
    if (!(t_end >= 0.0)) throw SolverError("t_end must be nonnegative");
    if (!(reaction_substep_fraction > 0.0)) throw SolverError("reaction substep fraction must be positive");
    if (max_dt && !(*max_dt > 0.0)) throw SolverError("max_dt must be positive");
    for (double t : snapshot_times) {
        if (!(t >= 0.0 && t <= t_end)) {
            throw SolverError("snapshot time " + std::to_string(t) + " lies outside [0, t_end]");
        }
    }
}

namespace {

inline double ipow(double x, int m) {
    double r = x;
    for (int k = 1; k < m; ++k) r *= x;
    return r;
}

// Precomputed flux coefficients for the radial operator
//   L(u)_i = (c_{i+1} (U_{i+1} - U_i) - c_i (U_i - U_{i-1})) / V_i,  U = u^m,
// with c_0 = c_Nr = 0 (symmetry at the origin, zero flux at r = R).
struct RadialOperator {
    std::vector<double> coupling;   // A_k / dr for faces 1..Nr-1, zero at 0 and Nr
    std::vector<double> inv_volume;
    int m;

    RadialOperator(const RadialGrid& g, int m_) : coupling(g.Nr + 1, 0.0), inv_volume(g.Nr), m(m_) {
        for (std::size_t k = 1; k < g.Nr; ++k) coupling[k] = g.face_areas[k] / g.dr;
        for (std::size_t i = 0; i < g.Nr; ++i) inv_volume[i] = 1.0 / g.volumes[i];
    }

    // out = u + dt L(u)
    void euler(const std::vector<double>& u, double dt, std::vector<double>& U, std::vector<double>& out) const {
        const std::size_t n = u.size();
        for (std::size_t i = 0; i < n; ++i) U[i] = ipow(u[i], m);
        double flux_in = 0.0;  // flux through face i, positive towards larger r
        for (std::size_t i = 0; i < n; ++i) {
            const double flux_out = i + 1 < n ? coupling[i + 1] * (U[i + 1] - U[i]) : 0.0;
            out[i] = u[i] + dt * (flux_out - flux_in) * inv_volume[i];
            flux_in = flux_out;
        }
    }
};

struct CartesianOperator {
    std::size_t nx, ny;
    double inv_h2;
    int m;

    CartesianOperator(const CartesianGrid2D& g, int m_) : nx(g.Nx), ny(g.Ny), inv_h2(1.0 / (g.h * g.h)), m(m_) {}

    void euler(const std::vector<double>& u, double dt, std::vector<double>& U, std::vector<double>& out) const {
        for (std::size_t i = 0; i < u.size(); ++i) U[i] = ipow(u[i], m);
        for (std::size_t j = 0; j < ny; ++j) {
            for (std::size_t i = 0; i < nx; ++i) {
                const std::size_t c = j * nx + i;
                double s = 0.0;
                if (i > 0) s += U[c - 1] - U[c];
                if (i + 1 < nx) s += U[c + 1] - U[c];
                if (j > 0) s += U[c - nx] - U[c];
                if (j + 1 < ny) s += U[c + nx] - U[c];
                out[c] = u[c] + dt * s * inv_h2;
            }
        }
    }
};

template <class Op>
struct DiffusionStepper {
    Op op;
    std::vector<double> U, stage1, stage2;

    DiffusionStepper(Op o, std::size_t n) : op(std::move(o)), U(n), stage1(n), stage2(n) {}

    // SSP-RK2: u1 = E(u), u2 = (u + E(u1)) / 2
    void step(std::vector<double>& u, double dt) {
        op.euler(u, dt, U, stage1);
        op.euler(stage1, dt, U, stage2);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = 0.5 * (u[i] + stage2[i]);
    }
};

struct ReactionStepper {
    BistableReaction r;
    double inv_eps2;
    double max_substep;

    ReactionStepper(const SolverConfig& cfg, const BistableReaction& r_, double u_cap)
        : r(r_), inv_eps2(1.0 / (cfg.eps * cfg.eps)) {
        const double slope = std::max(r.max_abs_derivative(0.0, u_cap), 1e-300);
        max_substep = cfg.reaction_substep_fraction * cfg.eps * cfg.eps / slope;
    }

    void step(std::vector<double>& u, double dt) const {
        if (dt <= 0.0) return;
        const auto n_sub = static_cast<std::size_t>(std::ceil(dt / max_substep));
        const double h = dt / static_cast<double>(n_sub);
        const double c = h * inv_eps2;
        for (double& v : u) {
            double y = v;
            for (std::size_t s = 0; s < n_sub; ++s) {
                const double k1 = r.eval(y);
                if (k1 == 0.0) break;  // exact equilibrium: every later stage is zero too
                const double k2 = r.eval(y + 0.5 * c * k1);
                const double k3 = r.eval(y + 0.5 * c * k2);
                const double k4 = r.eval(y + c * k3);
                y += c * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            }
            v = y;
        }
    }
};

template <class Grid>
void check_size(const Grid& grid, const Field& u) {
    if (u.size() != grid.size()) throw SolverError("field size does not match grid");
}

template <class Grid>
void check_cfl(const SolverConfig& cfg, const Grid& grid, const Field& u, double dt) {
    const double limit = cfl_dt(cfg, grid, u);
    if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
        throw SolverError("diffusion step dt = " + std::to_string(dt) + " violates the CFL bound " +
                          std::to_string(limit));
    }
}

RadialOperator make_operator(const RadialGrid& g, int m) { return RadialOperator(g, m); }
CartesianOperator make_operator(const CartesianGrid2D& g, int m) { return CartesianOperator(g, m); }

template <class Grid>
Field step_diffusion_impl(const SolverConfig& cfg, const Grid& grid, const Field& u, double dt) {
    check_size(grid, u);
    check_cfl(cfg, grid, u, dt);
    DiffusionStepper stepper(make_operator(grid, cfg.m), u.size());
    Field out = u;
    stepper.step(out.values, dt);
    return out;
}

template <class Grid>
Field strang_impl(const SolverConfig& cfg, const BistableReaction* r, const Grid& grid, const Field& u,
                  double dt) {
    check_size(grid, u);
    Field out = u;
    std::optional<ReactionStepper> react;
    if (r) {
        react.emplace(cfg, *r, std::max(1.0, u.max()));
        react->step(out.values, 0.5 * dt);
    }
    if (cfg.diffusion) {
        check_cfl(cfg, grid, out, dt);
        DiffusionStepper stepper(make_operator(grid, cfg.m), u.size());
        stepper.step(out.values, dt);
    }
    if (react) react->step(out.values, 0.5 * dt);
    return out;
}

template <class Grid>
std::vector<Snapshot> run_impl(const SolverConfig& cfg, const BistableReaction* r, const Grid& grid,
                               const Field& u0, const StepObserver& observer) {
    cfg.validate();
    check_size(grid, u0);
    if (!u0.all_finite()) throw SolverError("initial field has non-finite values");
    const double u0_max = u0.max();
    double u0_min = u0.values.empty() ? 0.0 : *std::min_element(u0.values.begin(), u0.values.end());
    if (u0_min < 0.0) throw SolverError("initial field must be nonnegative");

    const double hi = std::max(r ? std::max(r->largest_zero(), 1.0) : 1.0, u0_max) + cfg.bound_slack;
    const double lo = -cfg.bound_slack;

    std::vector<double> schedule = cfg.snapshot_times;
    if (schedule.empty()) schedule = {0.0, cfg.t_end};
    std::sort(schedule.begin(), schedule.end());
    schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());

    std::optional<ReactionStepper> react;
    if (r) react.emplace(cfg, *r, std::max(1.0, u0_max));
    DiffusionStepper stepper(make_operator(grid, cfg.m), u0.size());

    std::vector<Snapshot> out;
    out.reserve(schedule.size());
    Field u = u0;
    double t = 0.0;
    std::size_t next = 0;
    auto emit_due = [&] {
        while (next < schedule.size() && schedule[next] <= t) {
            out.push_back({t, u});
            ++next;
        }
    };
    if (observer) observer(t, u);
    emit_due();

    const double h = grid.spacing();
    const double dim = grid.stencil_dimension();
    while (t < cfg.t_end) {
        double umax = 0.0;
        for (double v : u.values) umax = std::max(umax, v);
        double dt = cfg.cfl_safety * h * h / (2.0 * dim * cfg.m * ipow(umax, cfg.m - 1) + 1e-30);
        if (cfg.max_dt) dt = std::min(dt, *cfg.max_dt);
        const double target = next < schedule.size() ? std::min(schedule[next], cfg.t_end) : cfg.t_end;
        double t_new = t + dt;
        if (t_new >= target) {
            dt = target - t;
            t_new = target;
        }

        if (react) react->step(u.values, 0.5 * dt);
        if (cfg.diffusion) stepper.step(u.values, dt);
        if (react) react->step(u.values, 0.5 * dt);
        t = t_new;

        for (std::size_t i = 0; i < u.size(); ++i) {
            const double v = u[i];
            if (!(v >= lo && v <= hi)) {
                throw SolverError("bound violated at t = " + std::to_string(t) + ", cell " + std::to_string(i) +
                                      ": u = " + std::to_string(v),
                                  Snapshot{t, u});
            }
        }
        if (observer) observer(t, u);
        emit_due();
    }
    return out;
}

} // namespace

double cfl_dt(const SolverConfig& cfg, const RadialGrid& grid, const Field& u) {
    const double h = grid.spacing();
    const double umax = std::max(u.max(), 0.0);
    return cfg.cfl_safety * h * h / (2.0 * grid.stencil_dimension() * cfg.m * ipow(umax, cfg.m - 1) + 1e-30);
}

double cfl_dt(const SolverConfig& cfg, const CartesianGrid2D& grid, const Field& u) {
    const double h = grid.spacing();
    const double umax = std::max(u.max(), 0.0);
    return cfg.cfl_safety * h * h / (2.0 * grid.stencil_dimension() * cfg.m * ipow(umax, cfg.m - 1) + 1e-30);
}

Field step_diffusion(const SolverConfig& cfg, const RadialGrid& grid, const Field& u, double dt) {
    return step_diffusion_impl(cfg, grid, u, dt);
}

Field step_diffusion(const SolverConfig& cfg, const CartesianGrid2D& grid, const Field& u, double dt) {
    return step_diffusion_impl(cfg, grid, u, dt);
}

Field step_reaction(const SolverConfig& cfg, const BistableReaction& r, const Field& u, double dt,
                    std::optional<double> u_cap) {
    const ReactionStepper stepper(cfg, r, u_cap.value_or(std::max(1.0, u.max())));
    Field out = u;
    stepper.step(out.values, dt);
    return out;
}

Field strang_step(const SolverConfig& cfg, const BistableReaction* r, const RadialGrid& grid,
                  const Field& u, double dt) {
    return strang_impl(cfg, r, grid, u, dt);
}

Field strang_step(const SolverConfig& cfg, const BistableReaction* r, const CartesianGrid2D& grid,
                  const Field& u, double dt) {
    return strang_impl(cfg, r, grid, u, dt);
}

std::vector<Snapshot> run(const SolverConfig& cfg, const BistableReaction* r, const RadialGrid& grid,
                          const Field& u0, const StepObserver& observer) {
    return run_impl(cfg, r, grid, u0, observer);
}

std::vector<Snapshot> run(const SolverConfig& cfg, const BistableReaction* r,
                          const CartesianGrid2D& grid, const Field& u0, const StepObserver& observer) {
    return run_impl(cfg, r, grid, u0, observer);
}

} // namespace layergen
