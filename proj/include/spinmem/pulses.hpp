#pragma once

// Hyperbolic-secant inversion drives. The complex exponent 1 + i mu is read
// as sech^1 * exp(i mu ln sech), giving the frequency-swept phase profile.
// inverse_filter_beta reconstructs the external field that produces a desired
// intra-cavity trajectory, accounting for cavity filtering and the reaction
// field of the simulated spins.

#include <cmath>
#include <complex>
#include <vector>

#include "spinmem/params.hpp"
#include "spinmem/schedule.hpp"

namespace spinmem {

class SechPulse {
public:
    SechPulse(const DriveSpec& spec, const PhysicalParams& params) : spec_(spec) {
        spec_.validate();
        if (!(params.g > 0.0))
            throw ConfigError("SechPulse: chi_max requires a nonzero single-spin coupling");
        a_max_ = spec.chi_max / (2.0 * params.g);
    }

    double a_max() const { return a_max_; }
    const DriveSpec& spec() const { return spec_; }

    bool inside_window(double t) const {
        return std::abs(t - spec_.t_center) <= 0.5 * spec_.window();
    }

    Complex amplitude(double t) const {
        if (!inside_window(t)) return {0.0, 0.0};
        const double x = spec_.beta_sech * (t - spec_.t_center);
        const double s = 1.0 / std::cosh(x);
        // sech^(1+i mu) = sech * exp(i mu ln sech)
        return a_max_ * s * std::exp(Complex(0.0, spec_.mu * std::log(s)));
    }

    /// d a_c/dt = -(1 + i mu) beta_sech tanh(x) a_c(t).
    Complex derivative(double t) const {
        if (!inside_window(t)) return {0.0, 0.0};
        const double x = spec_.beta_sech * (t - spec_.t_center);
        return -Complex(1.0, spec_.mu) * spec_.beta_sech * std::tanh(x) * amplitude(t);
    }

private:
    DriveSpec spec_;
    double a_max_ = 0.0;
};

inline Complex sech_drive_amplitude(const DriveSpec& spec, const PhysicalParams& params,
                                    double t) {
    return SechPulse(spec, params).amplitude(t);
}

/// Uniformly sampled complex time series with cubic Hermite interpolation,
/// used to carry the reconstructed drive back into a simulation.
class ComplexSpline {
public:
    ComplexSpline() = default;
    ComplexSpline(double t0, double dt, std::vector<Complex> values,
                  std::vector<Complex> derivatives)
        : t0_(t0), dt_(dt), v_(std::move(values)), d_(std::move(derivatives)) {
        if (v_.size() != d_.size() || v_.size() < 2)
            throw ConfigError("ComplexSpline: need matching value/derivative samples");
    }

    bool empty() const { return v_.empty(); }
    double t_begin() const { return t0_; }
    double t_end() const { return t0_ + dt_ * (static_cast<double>(v_.size()) - 1.0); }

    Complex operator()(double t) const {
        if (v_.empty() || t <= t0_) return v_.empty() ? Complex{0, 0} : v_.front();
        const double s = (t - t0_) / dt_;
        const auto k = static_cast<std::size_t>(s);
        if (k + 1 >= v_.size()) return v_.back();
        const double u = s - static_cast<double>(k);
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        return h00 * v_[k] + (h10 * dt_) * d_[k] + h01 * v_[k + 1] + (h11 * dt_) * d_[k + 1];
    }

private:
    double t0_ = 0.0, dt_ = 1.0;
    std::vector<Complex> v_, d_;
};

/// beta(t) = [da_c/dt + (kappa + i Dcs) a_c + i sum_m G_m s_m(t)] / sqrt(2 kappa)
/// for a desired differentiable trajectory (value + derivative callables) and
/// the instantaneous reaction field of the simulated class coherences s_m.
/// The spin sums must come from a simulation driven by the same trajectory.
inline Complex inverse_filter_beta_point(Complex a_desired, Complex da_desired, double kappa,
                                         double delta_cs, Complex reaction_sum) {
    if (!(kappa > 0.0)) throw ConfigError("inverse_filter_beta: kappa must be > 0");
    return (da_desired + Complex(kappa, delta_cs) * a_desired +
            Complex(0.0, 1.0) * reaction_sum) /
           std::sqrt(2.0 * kappa);
}

}  // namespace spinmem
