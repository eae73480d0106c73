#pragma once

#include <layergen/diagnostics.hpp>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace layergen {

class ReactionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cubic bistable nonlinearity stored in factored form
///
///     f(u) = scale * (u - z0)(u - z1)(u - z2) + offset
///
/// with one root designated as the unstable zero `a`. The factored form makes
/// f vanish exactly (bitwise) at the roots when offset == 0, so the equilibria
/// of the reaction ODE are exact fixed points of any Runge-Kutta integrator.
///
/// The default is f(u) = u(1-u)(u-a), i.e. scale = -1 and roots {0, a, 1}.
class BistableReaction {
public:
    /// u(1-u)(u-a)
    static BistableReaction cubic(double a);

    /// Arbitrary factored cubic; `a` names which root plays the unstable zero.
    /// No validation is done here, see validate_bistable().
    static BistableReaction from_factors(double scale, std::array<double, 3> roots,
                                         double a, double offset = 0.0);

    double a() const { return a_; }
    double scale() const { return scale_; }
    double offset() const { return offset_; }
    const std::array<double, 3>& roots() const { return roots_; }

    double eval(double u) const {
        return scale_ * (u - roots_[0]) * (u - roots_[1]) * (u - roots_[2]) + offset_;
    }

    double derivative(double u) const {
        const double d0 = u - roots_[0], d1 = u - roots_[1], d2 = u - roots_[2];
        return scale_ * (d1 * d2 + d0 * d2 + d0 * d1);
    }

    double second_derivative(double u) const {
        return 2.0 * scale_ * ((u - roots_[0]) + (u - roots_[1]) + (u - roots_[2]));
    }

    /// f'(a), the linear growth rate at the unstable zero.
    double mu() const { return derivative(a_); }

    /// max |f'(u)| over [lo, hi]; f' is quadratic so the max sits at an end
    /// point or at the vertex.
    double max_abs_derivative(double lo, double hi) const;

    /// Largest real zero of f (the upper stable state). Equals max(roots)
    /// when offset == 0.
    double largest_zero() const;

private:
    BistableReaction(double scale, std::array<double, 3> roots, double a, double offset)
        : scale_(scale), roots_(roots), a_(a), offset_(offset) {}

    double scale_;
    std::array<double, 3> roots_;
    double a_;
    double offset_;
};

/// Checks the bistable hypotheses: a in (0,1), f(0)=f(a)=f(1)=0 to 1e-14, the
/// slope signs at the three zeros, and the sign pattern of f on a dense sample
/// of [-2, 2]. Never throws.
Diagnostics validate_bistable(const BistableReaction& r, std::size_t samples = 10000);

/// f_delta = f + delta, re-centred on its own unstable zero.
struct PerturbedReaction {
    BistableReaction base;
    double delta;
    double a_delta;      // unstable zero of f_delta
    double mu_delta;     // f'(a_delta)
    double lower_zero;   // stable zero near 0
    double upper_zero;   // stable zero near 1

    /// f_delta as a reaction in its own right, with a() == a_delta. Feeding
    /// this into the ODE kernel gives the perturbed flow Y(tau, xi; delta).
    BistableReaction reaction() const;
};

/// Locates the zeros of f + delta by sign-change bracketing on [-1, 2] and
/// refines the middle one with safeguarded Newton (bisection fallback,
/// absolute tolerance 1e-12) started at a. Throws ReactionError when f + delta
/// does not have three simple zeros there.
PerturbedReaction perturb(const BistableReaction& r, double delta);

/// Interval of delta values for which perturb() succeeds, found by bisection
/// on the three-zero predicate.
std::pair<double, double> valid_delta_range(const BistableReaction& r);

} // namespace layergen
