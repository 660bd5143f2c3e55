#pragma once

// Static ensemble/cavity constants and per-segment derived rates.
//
// Unit convention used throughout the library: the inhomogeneous FWHM w is
// the rate unit (w = 1), all other rates are dimensionless multiples of w and
// all times are multiples of 1/w.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace spinmem {

using Complex = std::complex<double>;

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Thrown on invalid configuration input (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a requested protocol timeline cannot be realized (exit code 3).
class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an integration or fit fails numerically (exit code 4).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PhysicalParams {
    double w = 1.0;          // Lorentzian FWHM of spin detunings
    double tau = kInfinity;  // collision-like dephasing waiting time
    double n_spins = 1.0;    // ensemble size N (real-valued; populations are never rounded)
    double g = 0.0;          // single-spin coupling, homogeneous across spins

    double gamma_perp() const { return 1.0 / tau; }
    double big_gamma() const { return gamma_perp() + 0.5 * w; }
    double g_ens() const { return g * std::sqrt(n_spins); }
    double g_bar() const { return g; }

    void validate() const {
        if (!(w > 0.0)) throw ConfigError("PhysicalParams: w must be > 0");
        if (!(tau > 0.0)) throw ConfigError("PhysicalParams: tau must be > 0");
        if (!(n_spins >= 1.0)) throw ConfigError("PhysicalParams: n_spins must be >= 1");
        if (!(g >= 0.0)) throw ConfigError("PhysicalParams: g must be >= 0");
    }

    /// Convenience constructor fixing the ensemble coupling instead of g.
    static PhysicalParams from_g_ens(double w, double tau, double n_spins, double g_ens) {
        PhysicalParams p;
        p.w = w;
        p.tau = tau;
        p.n_spins = n_spins;
        p.g = g_ens / std::sqrt(n_spins);
        p.validate();
        return p;
    }
};

/// Rates that depend on the cavity settings of one protocol segment.
struct DerivedRates {
    double cooperativity = 0.0;  // C = g_ens^2 / (kappa Gamma)
    double c_tilde = 0.0;        // C / (1 + Delta_cs'^2 / (kappa+Gamma)^2)
    double gamma_p = 0.0;        // 2 kappa g^2 / (kappa^2 + Delta_cs^2)
    Complex zeta{0.0, 0.0};      // g_ens^2 (Delta_cs + i kappa) / (kappa^2 + Delta_cs^2)
};

inline DerivedRates derive_rates(const PhysicalParams& p, double kappa, double delta_cs,
                                 double delta_cs_prime) {
    DerivedRates r;
    const double gens2 = p.g_ens() * p.g_ens();
    const double gamma = p.big_gamma();
    r.cooperativity = (kappa > 0.0) ? gens2 / (kappa * gamma) : kInfinity;
    const double dks = delta_cs_prime / (kappa + gamma);
    r.c_tilde = r.cooperativity / (1.0 + dks * dks);
    const double den = kappa * kappa + delta_cs * delta_cs;
    if (den > 0.0) {
        r.gamma_p = 2.0 * kappa * p.g * p.g / den;
        r.zeta = gens2 * Complex(delta_cs, kappa) / den;
    }
    return r;
}

inline DerivedRates derive_rates(const PhysicalParams& p, double kappa, double delta_cs) {
    return derive_rates(p, kappa, delta_cs, delta_cs);
}

}  // namespace spinmem
