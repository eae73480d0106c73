#pragma once

#include <layergen/geometry.hpp>
#include <layergen/reaction.hpp>

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace layergen {

struct SolverConfig {
    int m = 2;
    double eps = 0.01;
    double cfl_safety = 0.4;
    double t_end = 0.0;
    /// Times at which run() records a snapshot. Empty means {0, t_end}.
    std::vector<double> snapshot_times;
    /// Reaction substeps are at most this fraction of eps^2 / max|f'|.
    double reaction_substep_fraction = 0.1;
    bool diffusion = true;
    /// Optional cap on the step; twin runs share it so both see the same
    /// step sequence.
    std::optional<double> max_dt;
    /// Slack on the a priori bounds checked after every step.
    double bound_slack = 1e-12;

    void validate() const;
};

struct Snapshot {
    double t = 0.0;
    Field field;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::optional<Snapshot> diagnostic = std::nullopt)
        : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}

    /// State at the moment of failure, when the failure came from a step.
    const std::optional<Snapshot>& diagnostic() const { return diagnostic_; }

private:
    std::optional<Snapshot> diagnostic_;
};

/// Called with t = 0 and after every accepted step.
using StepObserver = std::function<void(double t, const Field& u)>;

/// cfl_safety h^2 / (2 d m max(u)^{m-1} + 1e-30), d the stencil dimension.
double cfl_dt(const SolverConfig& cfg, const RadialGrid& grid, const Field& u);
double cfl_dt(const SolverConfig& cfg, const CartesianGrid2D& grid, const Field& u);

/// One step of u_t = Lap(u^m) with zero flux on the boundary. Conservative
/// finite volumes in space; the two-stage strong-stability-preserving
/// Runge-Kutta method in time, so each stage is a monotone forward Euler
/// update under the same step bound. Throws SolverError if dt exceeds cfl_dt.
Field step_diffusion(const SolverConfig& cfg, const RadialGrid& grid, const Field& u, double dt);
Field step_diffusion(const SolverConfig& cfg, const CartesianGrid2D& grid, const Field& u, double dt);

/// Per-cell u' = f(u)/eps^2 over dt with classical RK4 substeps no longer than
/// fraction * eps^2 / max|f'| on [0, u_cap]. u_cap defaults to max(1, max u).
Field step_reaction(const SolverConfig& cfg, const BistableReaction& r, const Field& u, double dt,
                    std::optional<double> u_cap = std::nullopt);

/// Half reaction step, full diffusion step, half reaction step. A null
/// reaction means f = 0.
Field strang_step(const SolverConfig& cfg, const BistableReaction* r, const RadialGrid& grid,
                  const Field& u, double dt);
Field strang_step(const SolverConfig& cfg, const BistableReaction* r, const CartesianGrid2D& grid,
                  const Field& u, double dt);

/// Advances u0 to cfg.t_end and returns the scheduled snapshots. After every
/// step checks lo - slack <= u <= hi + slack with lo = 0 and
/// hi = max(largest zero of f, max u0) (that is max(1, max u0) for the
/// unperturbed reaction); a violation throws SolverError carrying the state.
std::vector<Snapshot> run(const SolverConfig& cfg, const BistableReaction* r, const RadialGrid& grid,
                          const Field& u0, const StepObserver& observer = {});
std::vector<Snapshot> run(const SolverConfig& cfg, const BistableReaction* r,
                          const CartesianGrid2D& grid, const Field& u0,
                          const StepObserver& observer = {});

} // namespace layergen
