#include <layergen/envelope.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace layergen {

void EnvelopeParams::validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw EnvelopeError("eps must lie in (0, 1)");
    if (!(Cstar >= 0.0)) throw EnvelopeError("Cstar must be nonnegative");
    if (!(mu > 0.0)) throw EnvelopeError("mu must be positive");
    if (m < 2) throw EnvelopeError("diffusion exponent m must be at least 2");
}

double generation_time(double mu, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) {
        throw EnvelopeError("generation time needs eps in (0, 1), got " + std::to_string(eps));
    }
    if (!(mu > 0.0)) throw EnvelopeError("generation time needs mu > 0");
    return eps * eps * std::abs(std::log(eps)) / mu;
}

double GenerationClock::at_b(double b) const {
    return eps * eps * (std::abs(std::log(eps)) - b) / mu;
}

Envelope::Envelope(EnvelopeParams p, InitialProfile profile, BistableReaction reaction, KernelConfig kernel)
    : p_(p), profile_(profile), reaction_(reaction), kernel_(kernel) {
    p_.validate();
    kernel_.validate();
    t_eps_ = generation_time(p_.mu, p_.eps);
}

double Envelope::drift(double t) const {
    const double e2 = p_.eps * p_.eps;
    return e2 * p_.Cstar * std::expm1(p_.mu * t / e2);
}

double Envelope::xi(double rho, double t, Side side) const {
    const double d = drift(t);
    return profile_.value(rho) + (side == Side::plus ? d : -d);
}

double Envelope::eval_w(double rho, double t, Side side) const {
    const double tau = t / (p_.eps * p_.eps);
    const double Y = flow(reaction_, kernel_, tau, xi(rho, t, side)).Y;
    return std::max(Y, 0.0);
}

Envelope::Support Envelope::support_radius_wminus(double t) const {
    const double level = drift(t);
    if (level >= profile_.max_value()) return {0.0, true};
    return {profile_.radius_at_level(level), false};
}

double Envelope::residual_L(double rho, double t, Side side) const {
    const double e2 = p_.eps * p_.eps;
    const double x = xi(rho, t, side);
    if (side == Side::minus && !(x > 0.0)) {
        throw EnvelopeError("residual of w^- requested outside its support");
    }
    const KernelResult k = flow(reaction_, kernel_, t / e2, x);
    const int m = p_.m;
    const double Y = k.Y;
    const double grad2 = profile_.gradient_norm(rho) * profile_.gradient_norm(rho);
    const double lap = profile_.laplacian(rho);
    const double growth = p_.Cstar * p_.mu * std::exp(p_.mu * t / e2);
    const double Ym1 = std::pow(Y, m - 1);
    const double Ym2 = std::pow(Y, m - 2);
    const double diffusion = m * (m - 1) * Ym2 * k.Y_xi * grad2 +
                             m * Ym1 * (k.Y_xixi / k.Y_xi) * grad2 + m * Ym1 * lap;
    if (side == Side::minus) return -k.Y_xi * (growth + diffusion);
    return k.Y_xi * (growth - diffusion);
}

KernelConfig envelope_kernel(const KernelConfig& base, const InitialProfile& profile,
                             const EnvelopeParams& p) {
    KernelConfig k = base;
    // drift at t_eps is Cstar (eps - eps^2)
    const double reach = profile.max_value() + p.Cstar * (p.eps - p.eps * p.eps);
    k.C0 = std::max(base.C0, reach + 1.0);
    return k;
}

std::vector<double> CalibrationSettings::default_ladder() {
    std::vector<double> out;
    for (int k = 0; k <= 14; ++k) out.push_back(0.5 * std::ldexp(1.0, k));
    return out;
}

Calibration calibrate_Cstar(const EnvelopeParams& tmpl, const InitialProfile& profile,
                            const BistableReaction& r, const KernelConfig& kernel,
                            const CalibrationSettings& settings) {
    tmpl.validate();
    if (settings.ladder.empty()) throw EnvelopeError("empty Cstar ladder");
    const double t_eps = generation_time(tmpl.mu, tmpl.eps);
    const std::size_t ns = settings.space_samples, nt = settings.time_samples;
    const double rho_max = settings.sample_radius_factor * profile.R0;

    for (std::size_t rung = 0; rung < settings.ladder.size(); ++rung) {
        EnvelopeParams p = tmpl;
        p.Cstar = settings.ladder[rung];
        const KernelConfig kc = envelope_kernel(kernel, profile, p);
        const Envelope env(p, profile, r, kc);

        Calibration cal;
        cal.params = p;
        cal.kernel = kc;
        cal.rung = rung;
        cal.margin_minus = std::numeric_limits<double>::infinity();
        cal.margin_plus = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (std::size_t j = 0; j < nt && ok; ++j) {
            const double t = nt == 1 ? t_eps : t_eps * static_cast<double>(j) / static_cast<double>(nt - 1);
            for (std::size_t i = 0; i < ns && ok; ++i) {
                const double rho = rho_max * (static_cast<double>(i) + 0.5) / static_cast<double>(ns);
                const double xp = env.xi(rho, t, Side::plus);
                const double xm = env.xi(rho, t, Side::minus);
                cal.xi_max = std::max({cal.xi_max, std::abs(xp), std::abs(xm)});

                const double Lp = env.residual_L(rho, t, Side::plus);
                ++cal.points_plus;
                cal.margin_plus = std::min(cal.margin_plus, Lp);
                if (!(Lp >= 0.0)) ok = false;

                if (xm > 0.0) {
                    const double Lm = env.residual_L(rho, t, Side::minus);
                    ++cal.points_minus;
                    cal.margin_minus = std::min(cal.margin_minus, -Lm);
                    if (!(Lm <= 0.0)) ok = false;
                }
            }
        }
        if (ok) {
            cal.xi_within_C0 = cal.xi_max < kernel.C0;
            return cal;
        }
    }
    throw EnvelopeError("Cstar ladder exhausted at eps = " + std::to_string(tmpl.eps) +
                        "; eps is outside the range where the barriers can be calibrated");
}

} // namespace layergen
