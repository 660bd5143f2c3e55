#pragma once

// Discretization of the Lorentzian detuning distribution into frequency
// classes. Each class m carries a detuning delta_m, a normalized weight and a
// (real-valued) population pop_m = N * weight_m.

#include <cmath>
#include <numbers>
#include <vector>

#include "spinmem/params.hpp"

namespace spinmem {

inline double lorentzian_density(double delta, double w) {
    return (w / (2.0 * std::numbers::pi)) / (delta * delta + 0.25 * w * w);
}

struct FrequencyGrid {
    double delta_cut = 0.0;
    double d_delta = 0.0;
    std::vector<double> delta;    // class detunings, ascending, symmetric about 0
    std::vector<double> weight;   // normalized: sum == 1
    std::vector<double> pop;      // N * weight
    double truncated_mass = 1.0;  // Lorentzian mass inside [-delta_cut, delta_cut]

    std::size_t size() const { return delta.size(); }
    /// Time of the artificial full-grid rephasing caused by the finite spacing.
    double revival_time() const {
        return d_delta > 0.0 ? 2.0 * std::numbers::pi / d_delta : kInfinity;
    }
};

/// Spacing obeying d_delta <= 2 pi / (safety * t_mem).
inline double auto_class_spacing(double t_mem, double safety = 4.0) {
    if (!(t_mem > 0.0) || !(safety > 0.0))
        throw ConfigError("auto_class_spacing: t_mem and safety must be > 0");
    return 2.0 * std::numbers::pi / (safety * t_mem);
}

/// Symmetric grid over [-delta_cut, delta_cut]; weights follow f(delta_m) and
/// are renormalized to sum to exactly 1 so that sum_m g^2 pop_m = g_ens^2
/// holds identically. delta_cut == 0 is the forced homogeneous limit (one
/// class at delta = 0).
inline FrequencyGrid build_frequency_grid(const PhysicalParams& params, double delta_cut,
                                          double d_delta) {
    params.validate();
    FrequencyGrid grid;
    grid.delta_cut = delta_cut;
    grid.d_delta = d_delta;

    if (delta_cut == 0.0) {
        grid.delta = {0.0};
        grid.weight = {1.0};
        grid.pop = {params.n_spins};
        grid.truncated_mass = 1.0;
        return grid;
    }
    if (!(delta_cut > 0.0)) throw ConfigError("build_frequency_grid: delta_cut must be >= 0");
    if (!(d_delta > 0.0)) throw ConfigError("build_frequency_grid: d_delta must be > 0");
    if (d_delta > delta_cut)
        throw ConfigError("build_frequency_grid: d_delta must not exceed delta_cut");

    const long half = static_cast<long>(std::floor(delta_cut / d_delta));
    const std::size_t m_classes = static_cast<std::size_t>(2 * half + 1);
    grid.delta.resize(m_classes);
    grid.weight.resize(m_classes);
    grid.pop.resize(m_classes);

    double sum = 0.0;
    for (std::size_t i = 0; i < m_classes; ++i) {
        const double d = (static_cast<long>(i) - half) * d_delta;
        grid.delta[i] = d;
        grid.weight[i] = lorentzian_density(d, params.w) * d_delta;
        sum += grid.weight[i];
    }
    grid.truncated_mass = (2.0 / std::numbers::pi) * std::atan(2.0 * delta_cut / params.w);
    for (std::size_t i = 0; i < m_classes; ++i) {
        grid.weight[i] /= sum;
        grid.pop[i] = params.n_spins * grid.weight[i];
    }
    // exact symmetry: mirror the lower half onto the upper half
    for (std::size_t i = 0; i < m_classes / 2; ++i) {
        const std::size_t j = m_classes - 1 - i;
        const double mean = 0.5 * (grid.weight[i] + grid.weight[j]);
        grid.weight[i] = grid.weight[j] = mean;
        grid.pop[i] = grid.pop[j] = params.n_spins * mean;
    }
    return grid;
}

}  // namespace spinmem
