#pragma once

// Closed-form predictions for the detuned-decoupling protocol: gain and phase
// shift of the refocused collective spin, excess-noise levels, the
// adiabatic-elimination trajectory of <S_-> through the four segments, and
// the storage/retrieval rule-of-thumb gain.

#include <cmath>
#include <complex>

#include "spinmem/params.hpp"

namespace spinmem {

/// Effective cavity-induced rates of one decoupled segment.
struct StarkParams {
    Complex zeta{0.0, 0.0};
    Complex zeta_prime{0.0, 0.0};
    double gamma_p = 0.0;
    double p = -1.0;  // polarization during the segment
};

inline Complex stark_zeta(const PhysicalParams& params, double kappa, double delta_cs) {
    const double den = kappa * kappa + delta_cs * delta_cs;
    if (den <= 0.0) throw ConfigError("stark_zeta: kappa and delta_cs both zero");
    return params.g_ens() * params.g_ens() * Complex(delta_cs, kappa) / den;
}

struct DecouplingPrediction {
    double gain = 0.0;
    double theta = 0.0;
    double bracket = 0.0;        // g_ens^2 (Dcs + Dcs') / w / (kappa^2 + Dcs^2)
    bool adiabatic_valid = true; // |Dcs| >> g_ens assumed
};

/// Gain and phase of the refocused spin after t_mem = 4T of detuned
/// decoupling with detunings Dcs (outer parts) and Dcs' (middle part).
inline DecouplingPrediction decoupling_gain_theta(const PhysicalParams& params, double kappa,
                                                  double delta_cs, double delta_cs_prime,
                                                  double t_mem) {
    DecouplingPrediction out;
    out.bracket = params.g_ens() * params.g_ens() * (delta_cs + delta_cs_prime) / params.w /
                  (kappa * kappa + delta_cs * delta_cs);
    out.gain = std::exp(-params.gamma_perp() * t_mem) * (1.0 - out.bracket * out.bracket);
    out.theta = -2.0 * std::atan(out.bracket);
    out.adiabatic_valid = std::abs(delta_cs) > 10.0 * params.g_ens();
    return out;
}

/// Residual gain deficit beyond the adiabatic prediction: the energy parked
/// in the detuned cavity, of order g_ens^2 / Dcs^2.
inline double decoupling_energy_leak(const PhysicalParams& params, double delta_cs) {
    return params.g_ens() * params.g_ens() / (delta_cs * delta_cs);
}

struct ResnPrediction {
    double resn_mid = 0.0;  // at t = 2T
    double resn_end = 0.0;  // at t = 4T, valid for c_tilde << 1
    double c_tilde = 0.0;
};

inline ResnPrediction resn_predictions(const PhysicalParams& params, double kappa,
                                       double delta_cs_prime) {
    if (!(kappa > 0.0))
        throw NumericalError("resn_predictions: kappa must be > 0 (inverted ensemble unstable)");
    const double gamma = params.big_gamma();
    const double c = params.g_ens() * params.g_ens() / (kappa * gamma);
    const double r = delta_cs_prime / (kappa + gamma);
    const double c_tilde = c / (1.0 + r * r);
    if (!(c_tilde < 1.0))
        throw NumericalError("resn_predictions: effective cooperativity >= 1, unstable");
    ResnPrediction out;
    out.c_tilde = c_tilde;
    out.resn_mid = 2.0 * kappa * c_tilde / ((kappa + gamma) * (1.0 - c_tilde));
    out.resn_end = out.resn_mid * 2.0 * kappa / (kappa + gamma);
    return out;
}

/// Piecewise closed form of <S_-(t)> for the four-segment refocusing protocol
/// with ideal inversions (about x) at T and 3T. zeta applies in [0,T] and
/// [3T,4T], zeta' in [T,3T]. Asymptotic in t >> 1/w away from the segment
/// boundaries.
inline Complex adiabatic_trajectory(const StarkParams& stark, double quarter_time,
                                    Complex s0, double t, const PhysicalParams& params) {
    const double T = quarter_time;
    const double w = params.w;
    const double gp = params.gamma_perp();
    const double gamma = params.big_gamma();
    const Complex i(0.0, 1.0);
    const Complex z = stark.zeta, zp = stark.zeta_prime;

    if (t < 0.0 || t > 4.0 * T + 1e-12)
        throw ConfigError("adiabatic_trajectory: t outside [0, 4T]");
    if (t <= T) return s0 * std::exp(-gamma * t) * std::exp(i * z * t);
    const Complex den = 1.0 + i * (std::conj(z) + zp) / w;
    if (t <= 2.0 * T)
        return std::conj(s0) * std::exp(-gp * t) *
               std::exp((0.5 * w + i * std::conj(z)) * (t - 2.0 * T)) / den;
    if (t <= 3.0 * T)
        return std::conj(s0) * std::exp(-gp * t) *
               std::exp(-(0.5 * w + i * zp) * (t - 2.0 * T)) / den;
    const Complex den4 = 1.0 - i * (z + std::conj(zp)) / w;
    return s0 * std::exp(-gp * t) * std::exp((0.5 * w - i * std::conj(zp)) * (t - 4.0 * T)) /
           (den4 * den4);
}

/// G = G0 exp(-kappa t_swap) exp(-gamma_perp (t_mem - t_swap)).
inline double rule_of_thumb_gain(double g0, double kappa, double gamma_perp, double t_swap,
                                 double t_mem) {
    return g0 * std::exp(-kappa * t_swap) * std::exp(-gamma_perp * (t_mem - t_swap));
}

}  // namespace spinmem
