#pragma once

#include <layergen/cli/config.hpp>
#include <layergen/cli/output.hpp>
#include <layergen/envelope.hpp>
#include <layergen/verify.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layergen::cli {

/// f, or f + delta when reaction.delta is set.
BistableReaction make_reaction(const RunConfig& cfg);
InitialProfile make_profile(const RunConfig& cfg);
KernelConfig make_kernel(const RunConfig& cfg);
VerifyParams make_verify_params(const RunConfig& cfg);
CalibrationSettings make_calibration_settings(const RunConfig& cfg);

/// {0, t/4, t/2, 3t/4, t(b) for b in {1,2,3}, t, 1.5 t, 2 t} with t = t_eps,
/// plus t(b) for b = 10^{j/20} below |ln eps| (20 per decade of t_eps - t),
/// restricted to [0, t_end], sorted.
std::vector<double> snapshot_schedule(double mu, double eps, double t_end);

/// Weak residuals on a ladder of coarsened grids run with dt proportional
/// to h, so each level halves both.
struct WeakStudy {
    std::vector<std::size_t> cells;               // per level, coarse to fine
    std::vector<std::string> tests;
    std::vector<std::vector<double>> residuals;   // [level][test]
    std::vector<std::vector<double>> orders;      // [test][level pair]
    std::vector<double> slopes;                   // [test], least squares in log-log
};

struct CaseResult {
    double eps = 0.0;
    bool completed = false;     // false when the pipeline threw
    std::string error;
    double t_eps = 0.0;
    double r0 = 0.0;
    std::optional<Calibration> calibration;
    SandwichResult sandwich;
    BandResult bands;
    double width = 0.0;
    std::optional<double> Cthick;
    OptimalityResult optimality;
    std::vector<std::pair<std::string, double>> weak_residuals;  // main run
    WeakStudy weak_study;
    double self_convergence_linf = 0.0;
    std::size_t steps = 0;
    double runtime_s = 0.0;
    Diagnostics failures;
    std::vector<Snapshot> snapshots;

    bool passed() const { return completed && failures.empty(); }
};

/// Calibrates Cstar, simulates to t_end_factor * t_eps, and runs every
/// verification on the result.
CaseResult run_case(const RunConfig& cfg, double eps);

Json case_json(const RunConfig& cfg, const CaseResult& c);

/// report.json, snapshots.csv (per output.format), config echo and timings.
void write_case(const RunConfig& cfg, const CaseResult& c, const std::filesystem::path& dir);

struct WidthFit {
    double C = 0.0;       // width = C eps, least squares through the origin
    double r2 = 0.0;      // centred coefficient of determination
    std::size_t points = 0;
};

/// Needs at least two points; returns nullopt otherwise.
std::optional<WidthFit> fit_width(std::span<const double> eps, std::span<const double> width);

struct SweepResult {
    std::vector<CaseResult> cases;
    std::optional<WidthFit> width_fit;
    std::string width_fit_notice;
    std::optional<double> b_min, b_max, b_mean;
    std::optional<double> M0_ratio;   // max / min over completed cases
    Diagnostics failures;

    bool passed() const;
};

/// Runs every eps of sweep.eps_list, up to `jobs` at a time. Per-eps
/// failures are recorded and do not stop the sweep.
SweepResult run_sweep(const RunConfig& cfg, std::size_t jobs);

/// Per-eps directories plus sweep.csv and sweep.json under output.dir.
void write_sweep(const RunConfig& cfg, const SweepResult& s);

/// Upper limit on the empirical b accepted by the sweep-level check.
inline constexpr double b_cap_limit = 9.0;

} // namespace layergen::cli
