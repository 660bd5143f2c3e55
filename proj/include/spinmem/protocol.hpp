#pragma once

// End-to-end execution of the seven-segment memory protocol: instantaneous
// rotations, sech-driven inversions (prescribed intra-cavity trajectory or
// reconstructed external drive), input batteries and the extraction of the
// generalized gain map, output variances, excitation and qubit fidelity.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spinmem/grid.hpp"
#include "spinmem/iomap.hpp"
#include "spinmem/linear.hpp"
#include "spinmem/moments.hpp"
#include "spinmem/params.hpp"
#include "spinmem/pulses.hpp"
#include "spinmem/schedule.hpp"

namespace spinmem {

/// Rotate every class by the axis-angle rotation; the covariance blocks are
/// conjugated by the block-diagonal rotation, the cavity block is untouched.
inline SystemState apply_rotation(const SystemState& state, const RotationSpec& spec) {
    spec.validate();
    const Eigen::Vector3d axis(spec.axis_x, spec.axis_y, 0.0);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(spec.angle, axis).toRotationMatrix();

    SystemState out = state;
    const std::size_t m = state.n_classes();
    for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Vector3d v(state.mean[2 + 3 * i], state.mean[3 + 3 * i],
                                state.mean[4 + 3 * i]);
        out.mean.segment<3>(2 + 3 * i) = r * v;
    }
    if (state.has_cov()) {
        RowMatrix& c = out.cov;
        for (std::size_t i = 0; i < m; ++i)
            c.middleRows(2 + 3 * i, 3) = r * c.middleRows(2 + 3 * i, 3);
        for (std::size_t i = 0; i < m; ++i)
            c.middleCols(2 + 3 * i, 3) = c.middleCols(2 + 3 * i, 3) * r.transpose();
    }
    return out;
}

struct ProtocolOptions {
    MomentOptions moments;
    bool with_covariance = true;
    double beta_sample_dt = 0.0;  // 0: window / 4096 when reconstructing beta
};

struct ProtocolRunOutput {
    SystemState final_state;
    std::vector<ResnSample> series;
    Complex a_out{0.0, 0.0};
    double p_exc_end = 0.0;
};

namespace detail {

/// External-drive reconstruction: run the prescribed pass (means only) and
/// record beta(t) with its derivative for Hermite interpolation.
inline ComplexSpline record_beta(const SystemState& state, const CavitySegment& segment,
                                 const FrequencyGrid& grid, const PhysicalParams& params,
                                 const MomentOptions& base_opts, double sample_dt) {
    SechPulse pulse(*segment.drive, params);
    const double dt = sample_dt > 0.0 ? sample_dt : segment.duration / 4096.0;
    const std::size_t n_samples = static_cast<std::size_t>(segment.duration / dt) + 1;

    std::vector<Complex> values, derivs;
    values.reserve(n_samples + 2);
    derivs.reserve(n_samples + 2);

    SystemState mean_state = state;
    mean_state.cov.resize(0, 0);
    CavitySegment presc = segment;
    presc.drive->mode = DriveSpec::Mode::PrescribedIntracavity;

    MomentOptions opts = base_opts;
    opts.sample_dt = dt;
    const double t0 = state.t;
    auto sampler = [&](const SystemState& st) {
        Complex reaction{0.0, 0.0}, d_reaction{0.0, 0.0};
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Complex s = st.s_minus(i);
            const Complex ds = -Complex(params.gamma_perp(), grid.delta[i]) * s +
                               Complex(0.0, 1.0) * params.g * st.sz(i) * pulse.amplitude(st.t);
            reaction += params.g * grid.pop[i] * s;
            d_reaction += params.g * grid.pop[i] * ds;
        }
        const Complex a = pulse.amplitude(st.t);
        const Complex da = pulse.derivative(st.t);
        // d^2 a/dt^2 of the sech power, for the beta derivative
        const double x = pulse.spec().beta_sech * (st.t - pulse.spec().t_center);
        const Complex lam = -Complex(1.0, pulse.spec().mu) * pulse.spec().beta_sech;
        const double b = pulse.spec().beta_sech;
        const Complex dda = lam * (b / std::cosh(x) / std::cosh(x) * a + std::tanh(x) * da);
        values.push_back(
            inverse_filter_beta_point(a, da, segment.kappa, segment.delta_cs, reaction));
        derivs.push_back((dda + Complex(segment.kappa, segment.delta_cs) * da +
                          Complex(0.0, 1.0) * d_reaction) /
                         std::sqrt(2.0 * segment.kappa));
    };
    evolve_moments(mean_state, presc, grid, params, opts, sampler);
    return ComplexSpline(t0, dt, std::move(values), std::move(derivs));
}

inline SystemState run_segment(SystemState state, CavitySegment segment,
                               const FrequencyGrid& grid, const PhysicalParams& params,
                               const ProtocolOptions& options, const MomentSampler& sampler,
                               int index) {
    try {
        if (segment.rotation) {
            const RotationSpec rot = *segment.rotation;
            segment.rotation.reset();
            if (segment.duration <= 0.0) return apply_rotation(state, rot);
            CavitySegment half = segment;
            half.duration = 0.5 * segment.duration;
            state = evolve_moments(state, half, grid, params, options.moments, sampler);
            state = apply_rotation(state, rot);
            return evolve_moments(state, half, grid, params, options.moments, sampler);
        }
        if (segment.drive && segment.drive->mode == DriveSpec::Mode::ExternalBeta) {
            ComplexSpline beta = record_beta(state, segment, grid, params, options.moments,
                                             options.beta_sample_dt);
            CavitySegment driven = segment;
            driven.drive.reset();  // integrate the cavity mean under beta(t)
            return evolve_moments(state, driven, grid, params, options.moments, sampler,
                                  [beta](double t) { return beta(t); });
        }
        return evolve_moments(state, segment, grid, params, options.moments, sampler);
    } catch (const NumericalError& err) {
        throw NumericalError("segment " + std::to_string(index) + ": " + err.what());
    }
}

}  // namespace detail

/// Execute the schedule from an arbitrary prepared state (spectator runs seed
/// the ensemble directly).
inline ProtocolRunOutput run_protocol_from(SystemState state, const ProtocolSchedule& schedule,
                                           const FrequencyGrid& grid,
                                           const PhysicalParams& params,
                                           const ProtocolOptions& options = {}) {
    ProtocolRunOutput out;
    MomentSampler sampler;
    if (options.moments.sample_dt > 0.0) {
        sampler = [&](const SystemState& st) {
            out.series.push_back({st.t, noise_observables(st, grid)});
        };
    }
    int index = 1;
    for (const auto& segment : schedule.segments) {
        state = detail::run_segment(std::move(state), segment, grid, params, options, sampler,
                                    index);
        ++index;
    }
    out.a_out = state.cavity_mean();
    out.p_exc_end = noise_observables(state, grid).excitation;
    out.final_state = std::move(state);
    return out;
}

/// Execute the full schedule from a coherent cavity input with ground-state
/// spins and vacuum covariance.
inline ProtocolRunOutput run_protocol(const ProtocolSchedule& schedule, const FrequencyGrid& grid,
                                      const PhysicalParams& params, Complex alpha_in,
                                      const ProtocolOptions& options = {}) {
    SystemState state = SystemState::cavity_input(alpha_in, grid, options.with_covariance);
    return run_protocol_from(std::move(state), schedule, grid, params, options);
}

struct BatteryOutput {
    std::vector<IoPair> pairs;
    RunResult result;
    SystemState vacuum_final;
    double nonlinearity = 0.0;     // relative covariance deviation, when checked
    bool nonlinearity_warning = false;
    double axis_mismatch_deg = 0.0;  // mean-map axis vs covariance eigenvector
    bool axis_warning = false;
};

struct BatteryOptions {
    ProtocolOptions protocol;
    bool check_linearity = false;
    double nonlinearity_tol = 0.01;
    double axis_tol_deg = 3.0;
};

/// One protocol run per amplitude plus a vacuum run carrying the covariance.
/// The vacuum output mean is subtracted from every battery output, which
/// removes the signal-independent component generated by the pulses.
inline BatteryOutput run_battery(const ProtocolSchedule& schedule, const FrequencyGrid& grid,
                                 const PhysicalParams& params,
                                 const std::vector<Complex>& amplitudes,
                                 const BatteryOptions& options = {}) {
    if (amplitudes.size() < 2)
        throw ConfigError("run_battery: need at least two input amplitudes");
    {
        // at least two distinct phases
        bool distinct = false;
        for (std::size_t i = 1; i < amplitudes.size() && !distinct; ++i) {
            const Complex r = amplitudes[i] * std::conj(amplitudes[0]);
            if (std::abs(std::arg(r)) > 1e-9 && std::abs(amplitudes[i]) > 0.0) distinct = true;
        }
        if (!distinct)
            throw ConfigError("run_battery: amplitudes must span at least two phases");
    }

    BatteryOutput out;
    ProtocolOptions vac_opts = options.protocol;
    vac_opts.with_covariance = true;
    auto vacuum = run_protocol(schedule, grid, params, {0.0, 0.0}, vac_opts);
    const Complex a_offset = vacuum.a_out;

    ProtocolOptions mean_opts = options.protocol;
    mean_opts.with_covariance = false;
    mean_opts.moments.sample_dt = 0.0;
    for (const Complex alpha : amplitudes) {
        auto run = run_protocol(schedule, grid, params, alpha, mean_opts);
        const Complex rel = run.a_out - a_offset;
        out.pairs.push_back({std::sqrt(2.0) * alpha.real(), std::sqrt(2.0) * alpha.imag(),
                             std::sqrt(2.0) * rel.real(), std::sqrt(2.0) * rel.imag()});
    }

    if (options.check_linearity) {
        auto probe = run_protocol(schedule, grid, params, amplitudes.front(), vac_opts);
        const Eigen::Matrix2d c0 = vacuum.final_state.cov.topLeftCorner<2, 2>();
        const Eigen::Matrix2d c1 = probe.final_state.cov.topLeftCorner<2, 2>();
        out.nonlinearity = (c1 - c0).norm() / std::max(c0.norm(), 1e-300);
        out.nonlinearity_warning = out.nonlinearity > options.nonlinearity_tol;
    }

    out.result.gain_map = fit_io_map(out.pairs);
    const Eigen::Matrix2d cav = vacuum.final_state.cov.topLeftCorner<2, 2>();
    const double th1 = out.result.gain_map.theta1;
    out.result.sigma1_sq = variance_along(cav, th1);
    out.result.sigma2_sq = variance_along(cav, th1 + 0.5 * std::numbers::pi);
    out.result.p_exc_end = vacuum.p_exc_end;
    out.result.f_q = qubit_fidelity(out.result.gain_map, out.result.sigma1_sq,
                                    out.result.sigma2_sq);
    out.result.resn_series = vacuum.series;

    // the covariance principal axes should coincide with the mean-map axes
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cav);
    if (std::abs(es.eigenvalues()(0) - es.eigenvalues()(1)) >
        1e-6 * std::abs(es.eigenvalues().sum())) {
        const Eigen::Vector2d major = es.eigenvectors().col(1);  // largest eigenvalue
        const double ang = std::atan2(major(1), major(0));
        double diff = std::abs(ang - th1);
        while (diff > 0.5 * std::numbers::pi) diff = std::abs(diff - std::numbers::pi);
        out.axis_mismatch_deg = diff * 180.0 / std::numbers::pi;
        out.axis_warning = out.axis_mismatch_deg > options.axis_tol_deg;
    }
    out.vacuum_final = std::move(vacuum.final_state);
    return out;
}

/// Default battery: eight amplitudes of equal magnitude at 45-degree spacing.
inline std::vector<Complex> ring_battery(double radius, int count = 8) {
    std::vector<Complex> amps;
    for (int k = 0; k < count; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / count;
        amps.push_back(radius * Complex(std::cos(phi), std::sin(phi)));
    }
    return amps;
}

/// Simulate the storage swap on the actual grid and fit the focusing time
/// from the phase-versus-detuning profile near delta = 0.
inline double fitted_focus_time(const PhysicalParams& params, const FrequencyGrid& grid,
                                double kappa_swap, bool reverse, OdeOptions ode = {}) {
    const double t_swap = swap_time(params, kappa_swap, reverse);
    LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
    LinearSegment seg;
    seg.kappa = reverse ? -kappa_swap : kappa_swap;
    seg.duration = t_swap;
    seg.coupled = true;
    if (reverse) seg.gamma_perp_override = -params.gamma_perp();
    st = evolve_linear(st, seg, grid, params, ode);
    return focus_time(phase_profile(st, grid), default_focus_window(t_swap));
}

/// build_schedule with focusing times fitted from the simulated swap instead
/// of the crude closed-form estimate.
inline ProtocolSchedule plan_schedule(double t_mem, const PhysicalParams& params,
                                      const FrequencyGrid& grid, SegmentSpecs specs,
                                      FocusRule rule, OdeOptions ode = {}) {
    if (specs.with_swaps) {
        if (!specs.t_focus)
            specs.t_focus = fitted_focus_time(params, grid, specs.kappa_swap, false, ode);
        if (rule == FocusRule::ReverseAware && !specs.t_focus_rev)
            specs.t_focus_rev = fitted_focus_time(params, grid, specs.kappa_swap, true, ode);
    }
    return build_schedule(t_mem, params, specs, rule);
}

}  // namespace spinmem
