#pragma once

#include <layergen/diagnostics.hpp>
#include <layergen/reaction.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace layergen {

class KernelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KernelConfig {
    double dtau_max = 0.5;
    double tol = 1e-10;
    /// Amplitude bound, ||u0||_inf + 1. Initial values must lie in (-C0, C0).
    double C0 = 1.8;
    std::size_t max_steps = 2'000'000;

    void validate() const;
};

/// Y(tau, xi) of Y' = f(Y), Y(0) = xi, with dY/dxi and d2Y/dxi2.
struct KernelResult {
    double Y = 0.0;
    double Y_xi = 1.0;
    double Y_xixi = 0.0;
    double tau = 0.0;
    double xi = 0.0;
};

/// Integrates the reaction ODE jointly with its first and second variational
/// equations using an adaptive Dormand-Prince 5(4) pair. The integrator keeps
/// its step size between calls, so advancing through an increasing sequence
/// of times costs about as much as one long integration.
class FlowIntegrator {
public:
    FlowIntegrator(const BistableReaction& r, const KernelConfig& cfg, double xi);

    const KernelResult& state() const { return state_; }
    std::size_t steps() const { return steps_; }

    /// Advances to `tau` (>= current tau), landing on it exactly.
    const KernelResult& advance_to(double tau);

private:
    BistableReaction r_;
    KernelConfig cfg_;
    KernelResult state_;
    double h_;
    std::size_t steps_ = 0;
};

KernelResult flow(const BistableReaction& r, const KernelConfig& cfg, double tau, double xi);

/// Flow evaluated at each of `taus` (ascending) for a single initial value.
std::vector<KernelResult> flow_at(const BistableReaction& r, const KernelConfig& cfg, double xi,
                                  std::span<const double> taus);

/// |Y_xixi / Y_xi| at (tau, xi).
double curvature_ratio(const BistableReaction& r, const KernelConfig& cfg, double tau, double xi);

struct KernelBoundFit {
    double C = 0.0;           // max of |Y_xixi/Y_xi| / (e^{mu tau} - 1)
    double tau_at_max = 0.0;
    double xi_at_max = 0.0;
    std::size_t samples = 0;
};

/// Samples (tau, xi) with tau log-uniform on [1e-4 tau_max, tau_max] and xi
/// uniform on (-C0, C0) and records the largest normalised curvature ratio.
KernelBoundFit fit_curvature_bound(const BistableReaction& r, const KernelConfig& cfg,
                                   double tau_max, std::size_t samples, std::uint64_t seed);

/// Checks, at tau = |ln eps| / mu and on `samples` evenly spread xi in
/// (-C0, C0): Y in [-gamma, 1+gamma]; xi >= a + C_Y eps implies Y >= 1-gamma;
/// xi <= a - C_Y eps implies Y <= gamma.
Diagnostics after_time_check(const BistableReaction& r, const KernelConfig& cfg, double eps,
                             double gamma, double C_Y, std::size_t samples = 10000);

/// Smallest C_Y (to relative precision 1e-4) for which after_time_check
/// reports nothing. Throws KernelError when part (i) fails for every C_Y.
double find_after_time_constant(const BistableReaction& r, const KernelConfig& cfg, double eps,
                                double gamma, std::size_t samples = 10000);

struct LinearizationFit {
    double C1 = 0.0;
    double C2 = 0.0;
    double eta = 0.0;
    std::size_t samples = 0;  // number of (tau, xi) pairs evaluated
};

/// Bounds (Y - a) / (e^{mu tau} (xi - a)) over trajectories started at
/// `trajectories` values of xi in (a, 1-eta), log-spaced in xi - a, each
/// sampled every `dtau` until Y leaves (a, 1-eta).
LinearizationFit fit_linearization(const BistableReaction& r, const KernelConfig& cfg, double eta,
                                   std::size_t trajectories = 1000, double dtau = 0.05);

} // namespace layergen
