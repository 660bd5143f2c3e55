#pragma once

// Closed forms for the resonant cavity-spin swap of a Lorentzian-broadened
// ensemble in the linear regime (two-mode picture).

#include <cmath>
#include <numbers>

#include "spinmem/params.hpp"

namespace spinmem {

/// Reduced oscillation rate g' = g_ens sqrt(1 - (kappa-Gamma)^2 / 4 g_ens^2).
/// Throws in the overdamped regime where g' would be imaginary.
inline double reduced_swap_rate(const PhysicalParams& p, double kappa, bool reverse = false) {
    const double gamma = reverse ? (-p.gamma_perp() + 0.5 * p.w) : p.big_gamma();
    const double kap = reverse ? -kappa : kappa;
    const double gens = p.g_ens();
    const double disc = 1.0 - (kap - gamma) * (kap - gamma) / (4.0 * gens * gens);
    if (!(disc > 0.0))
        throw NumericalError("swap: overdamped regime, g' is not real (g_ens too small)");
    return gens * std::sqrt(disc);
}

/// T_swap = (pi / 2g') (1 - (2/pi) arctan[(kappa - Gamma) / 2g']).
/// reverse=true evaluates the reverse swapping time: kappa and gamma_perp
/// change sign while w does not.
inline double swap_time(const PhysicalParams& p, double kappa, bool reverse = false) {
    const double gamma = reverse ? (-p.gamma_perp() + 0.5 * p.w) : p.big_gamma();
    const double kap = reverse ? -kappa : kappa;
    const double gp = reduced_swap_rate(p, kappa, reverse);
    return (std::numbers::pi / (2.0 * gp)) *
           (1.0 - (2.0 / std::numbers::pi) * std::atan((kap - gamma) / (2.0 * gp)));
}

struct SwapAmplitudes {
    Complex a_c;
    Complex b;
};

/// Resonant two-mode evolution from (a_c, b) = (alpha, 0).
inline SwapAmplitudes swap_closed_form(double t, Complex alpha, const PhysicalParams& p,
                                       double kappa) {
    const double gamma = p.big_gamma();
    const double gp = reduced_swap_rate(p, kappa);
    const double env = std::exp(-0.5 * (kappa + gamma) * t);
    const double cosp = std::cos(gp * t);
    const double sinp = std::sin(gp * t);
    SwapAmplitudes out;
    out.a_c = alpha * env * (cosp - (kappa - gamma) / (2.0 * gp) * sinp);
    out.b = Complex(0.0, -1.0) * alpha * (p.g_ens() / gp) * env * sinp;
    return out;
}

}  // namespace spinmem
