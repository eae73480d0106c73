#pragma once

#include <layergen/diagnostics.hpp>
#include <layergen/envelope.hpp>
#include <layergen/geometry.hpp>
#include <layergen/solver.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace layergen {

class VerifyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct VerifyParams {
    double gamma = 0.1;          // band tolerance at t_eps
    double eta = 0.1;            // thickness tolerance
    double sandwich_tol = 5e-3;
    /// Candidate ladders {k * step : k = 1..rungs} for M0 and the thickness
    /// constant.
    double M0_step = 0.05;
    std::size_t M0_rungs = 4000;
    double C_step = 0.05;
    std::size_t C_rungs = 4000;

    void validate(double a) const;
};

// ---------------------------------------------------------------------------
// sandwich

struct SandwichResult {
    std::size_t checked = 0;
    std::size_t violations = 0;
    /// min over cells of min(u - w^-, w^+ - u); negative means a crossing.
    double worst_margin = 0.0;
    double worst_t = 0.0;
    double worst_rho = 0.0;
    std::size_t snapshots = 0;
};

/// Compares every snapshot with t <= t_eps against the barriers:
/// w^- - tol <= u <= w^+ + tol.
SandwichResult sandwich_check(std::span<const Snapshot> snapshots, const RadialGrid& grid,
                              const Envelope& env, double tol);
SandwichResult sandwich_check(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid,
                              const Envelope& env, double tol);

// ---------------------------------------------------------------------------
// bands at the generation time

struct BandResult {
    bool bounds_ok = false;       // 0 <= u <= 1 + gamma everywhere
    std::size_t bound_violations = 0;
    double u_min = 0.0;
    double u_max = 0.0;
    double M0_needed = 0.0;       // sup of |u0 - a| / eps over cells failing a band
    std::optional<double> M0;     // smallest ladder rung above M0_needed
};

BandResult classify_bands(const Field& u, const Field& u0, double a, double eps, const VerifyParams& vp);

/// Whether the two band implications hold at `u` for a given M0.
bool bands_hold(const Field& u, const Field& u0, double a, double eps, double gamma, double M0);

// ---------------------------------------------------------------------------
// layer thickness

/// Outer crossing of eta minus inner crossing of 1 - eta, both located by
/// linear interpolation between cell centres. Throws VerifyError
/// ("layer-not-found") if the profile does not cross both levels.
double measure_width(const Field& u, const RadialGrid& grid, double eta);

/// Mean over `rays` rays from `center` of the same radial width, sampling the
/// field bilinearly.
double measure_width(const Field& u, const CartesianGrid2D& grid, Point2 center, double eta,
                     std::size_t rays = 32);

struct ThreeBandResult {
    bool near_ok = false;      // u in [0, 1+eta] inside the neighbourhood
    double C_needed = 0.0;     // sup of |dist| / eps over cells failing their band
};

/// Three-region classification around Gamma0: u in [0, 1+eta] within C eps of
/// Gamma0, u in [0, eta] beyond it outside, u in [1-eta, 1+eta] beyond it
/// inside. `signed_dist` is positive outside Gamma0.
ThreeBandResult three_band(const Field& u, std::span<const double> signed_dist, double eps, double eta);

bool three_band_holds(const Field& u, std::span<const double> signed_dist, double eps, double eta,
                      double C);

/// Smallest rung of the C ladder for which three_band_holds.
std::optional<double> fit_thickness_constant(const Field& u, std::span<const double> signed_dist,
                                             double eps, const VerifyParams& vp);

// ---------------------------------------------------------------------------
// optimality of the generation time

struct OptimalityResult {
    std::optional<double> t_min;
    std::optional<double> b_fit;     // |ln eps| - mu t_min / eps^2
    double probe_u = 0.0;            // u at signed distance -C eps at the probe time
    double probe_t = 0.0;
    bool probe_below = false;        // probe_u < 1 - eta
};

/// Scans snapshots with t <= t_eps in time order for the first one at which
/// both the M0 bands and the three-region statement with constant C hold.
/// The probe is evaluated on the snapshot closest to `probe_time`.
OptimalityResult optimality_scan(std::span<const Snapshot> snapshots, const RadialGrid& grid,
                                 const Field& u0, double r0, double a, double eps, double mu,
                                 double M0, double C, double probe_time, const VerifyParams& vp);

/// Same scan on a box. Distances come from the sampled contour; the probe
/// sits on the ray through +x from the profile centre at radius r0 - C eps.
OptimalityResult optimality_scan(std::span<const Snapshot> snapshots, const CartesianGrid2D& grid,
                                 const Field& u0, const std::vector<Segment>& gamma0,
                                 const InitialProfile& profile, double r0, double a, double eps, double mu,
                                 double M0, double C, double probe_time, const VerifyParams& vp);

/// Radial profile value at radius r by linear interpolation between centres.
double sample_radial(const Field& u, const RadialGrid& grid, double r);

/// Bilinear interpolation between cell centres, clamped at the box edge.
double sample_bilinear(const Field& u, const CartesianGrid2D& grid, Point2 x);

/// Signed distance of every cell centre to Gamma0.
std::vector<double> signed_distances(const RadialGrid& grid, double r0);
std::vector<double> signed_distances(const CartesianGrid2D& grid, const std::vector<Segment>& gamma0,
                                     const InitialProfile& profile, double a);

// ---------------------------------------------------------------------------
// weak form

/// A test function sampled on the cells of a grid, with its Laplacian.
struct TestFunction {
    std::string name;
    std::vector<double> phi;
    std::vector<double> laplacian;
};

/// phi = 1, s - s^2/2 and s^2 - 2 s^3/3 with s = (r/R)^2; all have zero
/// radial derivative at r = R and are smooth at the origin.
std::vector<TestFunction> radial_test_functions(const RadialGrid& grid);

/// 1, cos(pi x/Lx), cos(pi x/Lx) cos(pi y/Ly) and cos(2 pi y/Ly).
std::vector<TestFunction> box_test_functions(const CartesianGrid2D& grid);

/// Accumulates both sides of the weak identity (time-independent phi)
///
///   int u(T) phi - int u0 phi - int int u^m Lap(phi) - eps^-2 int int f(u) phi
///
/// from a stream of states, trapezoid in time and midpoint in space.
class WeakResidualAccumulator {
public:
    WeakResidualAccumulator(std::vector<double> volumes, std::vector<TestFunction> tests,
                            const BistableReaction* reaction, int m, double eps);

    void add(double t, const Field& u);
    std::vector<double> residuals() const;
    const std::vector<TestFunction>& tests() const { return tests_; }

private:
    std::vector<double> moments(const Field& u, std::vector<double>& diffusion,
                                std::vector<double>& reaction) const;

    std::vector<double> volumes_;
    std::vector<TestFunction> tests_;
    std::optional<BistableReaction> reaction_;
    int m_;
    double inv_eps2_;

    bool started_ = false;
    double t_prev_ = 0.0;
    std::vector<double> initial_, current_;
    std::vector<double> diff_prev_, react_prev_;
    std::vector<double> diff_integral_, react_integral_;
};

std::vector<double> weak_residual(std::span<const Snapshot> snapshots, const RadialGrid& grid,
                                  const std::vector<TestFunction>& tests, const BistableReaction* reaction,
                                  int m, double eps);

// ---------------------------------------------------------------------------
// convergence

/// Everything needed to produce a radial solution at a given resolution.
struct RadialProblem {
    BistableReaction reaction = BistableReaction::cubic(0.3);
    bool with_reaction = true;
    InitialProfile profile;
    int dim = 2;
    double R = 1.0;
    SolverConfig solver;
};

/// Solution of `problem` on Nr cells at time t.
Field solve_radial(const RadialProblem& problem, std::size_t Nr, double t);

/// Volume-weighted average of a fine radial field onto a grid with Nr/k cells.
Field restrict_radial(const Field& fine, const RadialGrid& fine_grid, const RadialGrid& coarse_grid);

/// Block average of a fine box field onto a grid coarser by an integer factor.
Field restrict_box(const Field& fine, const CartesianGrid2D& fine_grid, const CartesianGrid2D& coarse_grid);

double l1_distance(const RadialGrid& grid, const Field& a, const Field& b);
double linf_distance(const Field& a, const Field& b);

struct ConvergenceLevel {
    std::size_t Nr = 0;
    double error_l1 = 0.0;
    double error_linf = 0.0;
};

struct ConvergenceResult {
    std::vector<ConvergenceLevel> levels;
    std::vector<double> orders;      // between consecutive levels, L1
    bool monotone = true;            // errors strictly decrease
};

/// Observed orders log(e_i / e_{i+1}) / log(refinement_{i+1} / refinement_i).
std::vector<double> convergence_orders(std::span<const double> errors, std::span<const double> refinement);

/// L1 self-convergence of the full solver at time t: every Nr in `ladder`
/// against a reference solution on `reference_Nr` cells.
ConvergenceResult convergence_study(const RadialProblem& problem, std::span<const std::size_t> ladder,
                                    std::size_t reference_Nr, double t);

// ---------------------------------------------------------------------------

struct VerificationReport {
    double eps = 0.0;
    double Cstar = 0.0;
    double margin_minus = 0.0;
    double margin_plus = 0.0;
    std::size_t sandwich_violations = 0;
    double sandwich_worst_margin = 0.0;
    double sandwich_tol = 0.0;
    double self_convergence_linf = 0.0;
    double sandwich_tol_budget = 0.0;  // 3x the measured L-inf self-convergence error
    bool bounds_ok = false;
    std::optional<double> M0;
    double width_eta = 0.0;
    std::optional<double> Cthick;
    std::optional<double> t_min;
    std::optional<double> b_fit;
    double probe_u = 0.0;
    bool probe_below = false;
    std::vector<std::pair<std::string, double>> weak_residuals;
    std::vector<double> orders;
    Diagnostics failures;
};

} // namespace layergen
