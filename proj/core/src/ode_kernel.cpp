#include <layergen/ode_kernel.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace layergen {

void KernelConfig::validate() const {
    if (!(dtau_max > 0.0)) throw KernelError("kernel dtau_max must be positive");
    if (!(tol > 0.0)) throw KernelError("kernel tol must be positive");
    if (!(C0 > 1.0)) throw KernelError("kernel C0 must exceed 1");
    if (max_steps == 0) throw KernelError("kernel max_steps must be positive");
}

namespace {

using State = std::array<double, 3>;

// (Y, Y_xi, Y_xixi)' = (f(Y), f'(Y) Y_xi, f''(Y) Y_xi^2 + f'(Y) Y_xixi)
inline State rhs(const BistableReaction& r, const State& y) {
    const double fp = r.derivative(y[0]);
    return {r.eval(y[0]), fp * y[1], r.second_derivative(y[0]) * y[1] * y[1] + fp * y[2]};
}

inline State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State out = y;
    for (const auto& [c, k] : terms) {
        if (c == 0.0) continue;
        for (int i = 0; i < 3; ++i) out[i] += h * c * (*k)[i];
    }
    return out;
}

// Dormand-Prince 5(4)
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

} // namespace

FlowIntegrator::FlowIntegrator(const BistableReaction& r, const KernelConfig& cfg, double xi)
    : r_(r), cfg_(cfg) {
    cfg_.validate();
    if (!(std::abs(xi) < cfg_.C0)) {
        throw KernelError("initial value xi = " + std::to_string(xi) + " is outside (-C0, C0) with C0 = " +
                          std::to_string(cfg_.C0));
    }
    state_.Y = xi;
    state_.xi = xi;
    h_ = std::min(cfg_.dtau_max, 1e-2);
}

const KernelResult& FlowIntegrator::advance_to(double tau) {
    if (!(tau >= state_.tau)) {
        throw KernelError("cannot integrate backwards: tau = " + std::to_string(tau));
    }
    State y{state_.Y, state_.Y_xi, state_.Y_xixi};
    double t = state_.tau;
    State k1 = rhs(r_, y);
    while (t < tau) {
        if (++steps_ > cfg_.max_steps) {
            throw KernelError("kernel step count exceeded " + std::to_string(cfg_.max_steps));
        }
        double h = std::min({h_, cfg_.dtau_max, tau - t});
        const bool last = (h == tau - t);

        const State k2 = rhs(r_, axpy(y, h, {{a21, &k1}}));
        const State k3 = rhs(r_, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
        const State k4 = rhs(r_, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State k5 = rhs(r_, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State k6 = rhs(r_, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State y_new = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const State k7 = rhs(r_, y_new);

        double err = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                  e7 * k7[i]);
            const double scale = cfg_.tol * (1.0 + std::max(std::abs(y[i]), std::abs(y_new[i])));
            err = std::max(err, std::abs(e) / scale);
        }
        if (!std::isfinite(err)) {
            h_ = 0.1 * h;
            continue;
        }

        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (err <= 1.0) {
            t = last ? tau : t + h;
            y = y_new;
            k1 = k7;
            // a short final step should not shrink the step carried to the next call
            if (!last || factor < 1.0) h_ = h * factor;
        } else {
            h_ = h * factor;
        }
    }
    state_.Y = y[0];
    state_.Y_xi = y[1];
    state_.Y_xixi = y[2];
    state_.tau = tau;
    return state_;
}

KernelResult flow(const BistableReaction& r, const KernelConfig& cfg, double tau, double xi) {
    if (!(tau >= 0.0)) throw KernelError("tau must be nonnegative");
    FlowIntegrator it(r, cfg, xi);
    return it.advance_to(tau);
}

std::vector<KernelResult> flow_at(const BistableReaction& r, const KernelConfig& cfg, double xi,
                                  std::span<const double> taus) {
    FlowIntegrator it(r, cfg, xi);
    std::vector<KernelResult> out;
    out.reserve(taus.size());
    for (double tau : taus) out.push_back(it.advance_to(tau));
    return out;
}

double curvature_ratio(const BistableReaction& r, const KernelConfig& cfg, double tau, double xi) {
    const KernelResult k = flow(r, cfg, tau, xi);
    return std::abs(k.Y_xixi / k.Y_xi);
}

KernelBoundFit fit_curvature_bound(const BistableReaction& r, const KernelConfig& cfg,
                                   double tau_max, std::size_t samples, std::uint64_t seed) {
    if (!(tau_max > 0.0)) throw KernelError("tau_max must be positive");
    std::mt19937_64 gen(seed);
    auto uniform = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    const double mu = r.mu();
    KernelBoundFit fit;
    fit.samples = samples;
    for (std::size_t i = 0; i < samples; ++i) {
        const double tau = tau_max * std::pow(10.0, -4.0 * uniform());
        double xi = cfg.C0 * (2.0 * uniform() - 1.0);
        if (!(std::abs(xi) < cfg.C0)) xi = 0.0;
        const double ratio = curvature_ratio(r, cfg, tau, xi) / std::expm1(mu * tau);
        if (ratio > fit.C) {
            fit.C = ratio;
            fit.tau_at_max = tau;
            fit.xi_at_max = xi;
        }
    }
    return fit;
}

Diagnostics after_time_check(const BistableReaction& r, const KernelConfig& cfg, double eps,
                             double gamma, double C_Y, std::size_t samples) {
    Diagnostics out;
    const double a = r.a();
    if (!(eps > 0.0 && eps < 0.5)) {
        out.push_back({"precondition", "eps must lie in (0, 0.5)"});
        return out;
    }
    if (!(gamma > 0.0 && gamma < std::min(a, 1.0 - a))) {
        out.push_back({"precondition", "gamma must lie in (0, min(a, 1-a))"});
        return out;
    }
    const double tau = std::abs(std::log(eps)) / r.mu();
    std::size_t bounds = 0, upper = 0, lower = 0;
    double worst_upper = 0.0, worst_lower = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double xi = -cfg.C0 + 2.0 * cfg.C0 * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        const double Y = flow(r, cfg, tau, xi).Y;
        if (Y < -gamma || Y > 1.0 + gamma) ++bounds;
        if (xi >= a + C_Y * eps && Y < 1.0 - gamma) {
            if (upper++ == 0) worst_upper = xi;
        }
        if (xi <= a - C_Y * eps && Y > gamma) {
            if (lower++ == 0) worst_lower = xi;
        }
    }
    if (bounds > 0)
        out.push_back({"range", std::to_string(bounds) + " samples leave [-gamma, 1+gamma]"});
    if (upper > 0)
        out.push_back({"upper-band", std::to_string(upper) + " samples above a + C_Y eps end below 1-gamma, e.g. xi = " +
                                         std::to_string(worst_upper)});
    if (lower > 0)
        out.push_back({"lower-band", std::to_string(lower) + " samples below a - C_Y eps end above gamma, e.g. xi = " +
                                         std::to_string(worst_lower)});
    return out;
}

double find_after_time_constant(const BistableReaction& r, const KernelConfig& cfg, double eps,
                                double gamma, std::size_t samples) {
    auto ok = [&](double c) { return after_time_check(r, cfg, eps, gamma, c, samples).empty(); };
    double hi = 1.0;
    while (!ok(hi)) {
        hi *= 2.0;
        if (hi * eps > 2.0 * cfg.C0) {
            throw KernelError("no C_Y satisfies the after-time bounds at eps = " + std::to_string(eps));
        }
    }
    double lo = 0.0;
    while (hi - lo > 1e-4 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (ok(mid)) hi = mid; else lo = mid;
    }
    return hi;
}

LinearizationFit fit_linearization(const BistableReaction& r, const KernelConfig& cfg, double eta,
                                   std::size_t trajectories, double dtau) {
    const double a = r.a();
    const double top = 1.0 - eta;
    if (!(eta > 0.0) || !(top > a) || trajectories == 0) {
        throw KernelError("eta = " + std::to_string(eta) + " leaves no admissible xi in (a, 1-eta)");
    }
    const double mu = r.mu();
    const double span = top - a;
    LinearizationFit fit;
    fit.eta = eta;
    fit.C1 = std::numeric_limits<double>::infinity();
    fit.C2 = 0.0;
    for (std::size_t k = 0; k < trajectories; ++k) {
        // xi - a from 1e-6 span up to just below span
        const double frac = trajectories == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(trajectories - 1);
        const double d = span * std::pow(10.0, -6.0 + frac * (6.0 - 1e-3));
        const double xi = a + d;
        if (!(xi > a && xi < top)) continue;
        FlowIntegrator it(r, cfg, xi);
        for (std::size_t j = 0;; ++j) {
            const double tau = dtau * static_cast<double>(j);
            const double Y = it.advance_to(tau).Y;
            if (!(Y > a && Y < top)) break;
            const double ratio = (Y - a) / (std::exp(mu * tau) * d);
            fit.C1 = std::min(fit.C1, ratio);
            fit.C2 = std::max(fit.C2, ratio);
            ++fit.samples;
        }
    }
    if (fit.samples == 0) throw KernelError("linearization sample is empty");
    return fit;
}

} // namespace layergen
