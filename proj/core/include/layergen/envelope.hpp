#pragma once

#include <layergen/geometry.hpp>
#include <layergen/ode_kernel.hpp>
#include <layergen/reaction.hpp>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace layergen {

class EnvelopeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnvelopeParams {
    double eps = 0.01;
    double Cstar = 1.0;
    double mu = 0.21;
    int m = 2;

    void validate() const;
};

/// mu^{-1} eps^2 |ln eps|. Throws EnvelopeError unless 0 < eps < 1.
double generation_time(double mu, double eps);

struct GenerationClock {
    double mu;
    double eps;
    double t_eps;

    explicit GenerationClock(double mu_, double eps_)
        : mu(mu_), eps(eps_), t_eps(generation_time(mu_, eps_)) {}

    /// mu^{-1} eps^2 (|ln eps| - b)
    double at_b(double b) const;
};

enum class Side { minus, plus };

/// The pair of barriers
///
///     w(x,t) = [ Y(t/eps^2, u0(x) -/+ eps^2 Cstar (e^{mu t/eps^2} - 1)) ]^+
///
/// built on the reaction flow, together with the residual
/// L[w] = w_t - Lap(w^m) - f(w)/eps^2 written in terms of the kernel
/// sensitivities.
class Envelope {
public:
    Envelope(EnvelopeParams p, InitialProfile profile, BistableReaction reaction, KernelConfig kernel);

    const EnvelopeParams& params() const { return p_; }
    const InitialProfile& profile() const { return profile_; }
    const BistableReaction& reaction() const { return reaction_; }
    const KernelConfig& kernel() const { return kernel_; }
    double t_eps() const { return t_eps_; }

    /// eps^2 Cstar (e^{mu t/eps^2} - 1)
    double drift(double t) const;
    double xi(double rho, double t, Side side) const;

    /// Throws KernelError when the kernel argument leaves (-C0, C0).
    double eval_w(double rho, double t, Side side) const;

    /// Radius of supp w^-(., t): where u0 equals the drift. Sets `empty` when
    /// the drift exceeds max u0.
    struct Support {
        double radius;
        bool empty;
    };
    Support support_radius_wminus(double t) const;

    /// Expanded L[w] at (rho, t). On the minus side rho must lie strictly
    /// inside the support of w^-; throws EnvelopeError otherwise.
    double residual_L(double rho, double t, Side side) const;

private:
    EnvelopeParams p_;
    InitialProfile profile_;
    BistableReaction reaction_;
    KernelConfig kernel_;
    double t_eps_;
};

/// Kernel configuration whose admissible range covers every argument the
/// envelope produces on [0, t_eps]. The a priori bound ||u0|| + 1 is kept when
/// it already suffices.
KernelConfig envelope_kernel(const KernelConfig& base, const InitialProfile& profile,
                             const EnvelopeParams& p);

struct CalibrationSettings {
    std::vector<double> ladder = default_ladder();
    std::size_t space_samples = 40;
    std::size_t time_samples = 40;
    double sample_radius_factor = 1.2;  // rho sampled on [0, factor * R0)

    static std::vector<double> default_ladder();
};

struct Calibration {
    EnvelopeParams params;
    KernelConfig kernel;          // range-widened kernel used for the checks
    double margin_minus = 0.0;    // min of -L[w^-] over the sample
    double margin_plus = 0.0;     // min of  L[w^+] over the sample
    std::size_t points_minus = 0;
    std::size_t points_plus = 0;
    std::size_t rung = 0;
    double xi_max = 0.0;          // largest |xi| reached on [0, t_eps]
    bool xi_within_C0 = false;    // whether xi stays in the unwidened (-C0, C0)
};

/// Smallest Cstar on the ladder for which L[w^-] <= 0 and L[w^+] >= 0 at
/// every point of a space-time grid over [0, t_eps]. Throws EnvelopeError when
/// the ladder is exhausted.
Calibration calibrate_Cstar(const EnvelopeParams& tmpl, const InitialProfile& profile,
                            const BistableReaction& r, const KernelConfig& kernel,
                            const CalibrationSettings& settings = {});

} // namespace layergen
