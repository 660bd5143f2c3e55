#pragma once

// Closed forms for the fully inverted ensemble coupled resonantly to the
// cavity: mean decay, transient quadrature variances and their steady states.
// These are the oracle base for the covariance propagation.

#include <cmath>

#include "spinmem/params.hpp"

namespace spinmem {

struct EigenRates {
    double lambda_plus;
    double lambda_minus;
    double lambda_zero;  // (lambda_+ + lambda_-)/2 = -(kappa+Gamma)/2
};

inline EigenRates eigenrates(const PhysicalParams& p, double kappa) {
    const double gamma = p.big_gamma();
    const double root = 0.5 * std::sqrt((kappa - gamma) * (kappa - gamma) +
                                        4.0 * p.g_ens() * p.g_ens());
    EigenRates r;
    r.lambda_zero = -0.5 * (kappa + gamma);
    r.lambda_plus = r.lambda_zero + root;
    r.lambda_minus = r.lambda_zero - root;
    return r;
}

struct InvertedDecayAmplitudes {
    Complex a_c;
    Complex s_minus_eff;  // S_-^eff = sum_j (g_j / g_bar) sigma_-^(j)
};

/// Mean evolution from a_c(0) = alpha with all spins inverted and coherences
/// zero. Handles the degenerate lambda_+ == lambda_- point by its limit.
inline InvertedDecayAmplitudes inverted_decay_closed_form(double t, Complex alpha,
                                                          const PhysicalParams& p,
                                                          double kappa) {
    const auto [lp, lm, l0] = eigenrates(p, kappa);
    const double gamma = p.big_gamma();
    InvertedDecayAmplitudes out;
    const double dl = lp - lm;
    if (std::abs(dl) < 1e-12 * std::max(std::abs(lp), 1.0)) {
        // e-folding limit: (f(lp)-f(lm))/(lp-lm) -> f'(l0)
        const double e = std::exp(l0 * t);
        out.a_c = alpha * e * (1.0 + (l0 + gamma) * t);
        out.s_minus_eff = Complex(0.0, 1.0) * p.g_bar() * p.n_spins * alpha * (t * e);
        return out;
    }
    const double ep = std::exp(lp * t), em = std::exp(lm * t);
    out.a_c = alpha * ((lp + gamma) * ep - (lm + gamma) * em) / dl;
    out.s_minus_eff = Complex(0.0, 1.0) * p.g_bar() * p.n_spins * alpha * (ep - em) / dl;
    return out;
}

struct SteadyStateNoise {
    double var_cavity_quadrature;  // <dX_c^2> = <dP_c^2>
    double var_spin_quadrature;    // <dS_x^eff 2> = <dS_y^eff 2>
};

/// Steady-state variances of the inverted ensemble; delta_cs != 0 adds
/// [delta_cs/(kappa+Gamma)]^2 to numerator and denominator.
inline SteadyStateNoise steady_state_noise(const PhysicalParams& p, double kappa,
                                           double delta_cs = 0.0) {
    const double gamma = p.big_gamma();
    if (!(kappa > 0.0)) throw NumericalError("steady_state_noise: kappa must be > 0");
    const double c = p.g_ens() * p.g_ens() / (kappa * gamma);
    const double det = delta_cs / (kappa + gamma);
    const double r = det * det;
    const double c_tilde = c / (1.0 + r);
    if (!(c_tilde < 1.0))
        throw NumericalError("steady_state_noise: unstable, effective cooperativity >= 1");
    const double asym = c * (kappa - gamma) / (kappa + gamma);
    SteadyStateNoise out;
    out.var_cavity_quadrature = 0.5 * (1.0 - asym + r) / (1.0 - c + r);
    out.var_spin_quadrature = p.n_spins * (1.0 + asym + r) / (1.0 - c + r);
    return out;
}

struct TransientVariances {
    double var_xc;
    double var_sx_eff;
};

/// Time-resolved variances of the resonant inverted ensemble starting from
/// vacuum cavity and coherence-free inversion (Var X_c = 1/2, Var S_x = N).
/// Valid for any C != 1; above threshold the "steady" term is the particular
/// solution and the exponentials diverge.
inline TransientVariances transient_variance_closed_form(double t, const PhysicalParams& p,
                                                         double kappa) {
    const auto [lp, lm, l0] = eigenrates(p, kappa);
    if (lp == 0.0 || lm == 0.0 || l0 == 0.0)
        throw NumericalError("transient_variance_closed_form: degenerate zero eigenrate");
    const double gamma = p.big_gamma();
    const double gens2 = p.g_ens() * p.g_ens();
    const double c = gens2 / (kappa * gamma);
    const double asym = c * (kappa - gamma) / (kappa + gamma);
    SteadyStateNoise ss;
    ss.var_cavity_quadrature = 0.5 * (1.0 - asym) / (1.0 - c);
    ss.var_spin_quadrature = p.n_spins * (1.0 + asym) / (1.0 - c);
    const double den = (kappa - gamma) * (kappa - gamma) + 4.0 * gens2;
    const double e2p = std::exp(2.0 * lp * t), e2m = std::exp(2.0 * lm * t),
                 e20 = std::exp(2.0 * l0 * t);
    TransientVariances out;
    out.var_xc = ss.var_cavity_quadrature +
                 (gens2 / den) * ((gamma + lp) / lp * e2p + (gamma + lm) / lm * e2m +
                                  (kappa - gamma) / l0 * e20);
    out.var_sx_eff = ss.var_spin_quadrature +
                     (2.0 * p.n_spins * gens2 / den) *
                         ((kappa + lp) / lp * e2p + (kappa + lm) / lm * e2m -
                          (kappa - gamma) / l0 * e20);
    return out;
}

}  // namespace spinmem
