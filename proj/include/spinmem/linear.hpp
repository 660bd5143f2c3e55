#pragma once

// Mean-value evolution in the linear (Holstein-Primakoff) regime: per-class
// complex coherences coupled to the cavity mode, the exact two-mode reduction
// for Lorentzian broadening, phase profiles and focus-time fits.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "spinmem/closed_forms.hpp"
#include "spinmem/grid.hpp"
#include "spinmem/ode.hpp"
#include "spinmem/params.hpp"

namespace spinmem {

/// Per-class coherences with frozen polarization. s_minus holds the per-spin
/// mean <sigma_-^(m)>; p is the frozen <sigma_z> of each class.
struct LinearState {
    Complex a_c{0.0, 0.0};
    std::vector<Complex> s_minus;
    std::vector<double> p;  // +1 or -1 per class
    double t = 0.0;

    static LinearState cavity_input(Complex alpha, const FrequencyGrid& grid,
                                    double polarization = -1.0) {
        LinearState st;
        st.a_c = alpha;
        st.s_minus.assign(grid.size(), Complex(0.0, 0.0));
        st.p.assign(grid.size(), polarization);
        return st;
    }
};

/// Collective amplitude b = sum_m (g pop_m / g_ens) s_minus_m. For a single
/// homogeneous class this equals sqrt(N) times the per-spin coherence.
inline Complex collective_amplitude(const LinearState& st, const FrequencyGrid& grid,
                                    const PhysicalParams& p) {
    Complex b{0.0, 0.0};
    const double gens = p.g_ens();
    for (std::size_t m = 0; m < grid.size(); ++m)
        b += (p.g * grid.pop[m] / gens) * st.s_minus[m];
    return b;
}

struct LinearSegment {
    double kappa = 0.0;
    double delta_cs = 0.0;
    double duration = 0.0;
    bool coupled = true;  // false: hard decoupling, g treated as exactly zero
    std::function<Complex(double)> drive;  // external beta(t), may be empty
    // Backward-rate variant used for reverse-swap analysis: overrides the
    // transverse decay (may be negative). kappa above may also be negative.
    std::optional<double> gamma_perp_override;
};

struct LinearSample {
    double t;
    Complex a_c;
    Complex b;
};

namespace detail {

inline void pack(const Complex& a, const std::vector<Complex>& s, Vector& y) {
    const std::size_t m = s.size();
    y.resize(2 * (m + 1));
    y[0] = a.real();
    y[1] = a.imag();
    for (std::size_t i = 0; i < m; ++i) {
        y[2 + 2 * i] = s[i].real();
        y[3 + 2 * i] = s[i].imag();
    }
}

inline void unpack(const Vector& y, Complex& a, std::vector<Complex>& s) {
    const std::size_t m = (static_cast<std::size_t>(y.size()) - 2) / 2;
    a = Complex(y[0], y[1]);
    s.resize(m);
    for (std::size_t i = 0; i < m; ++i) s[i] = Complex(y[2 + 2 * i], y[3 + 2 * i]);
}

}  // namespace detail

inline Complex collective_amplitude_packed(const Vector& y, const FrequencyGrid& grid,
                                           const PhysicalParams& p) {
    Complex b{0.0, 0.0};
    const double gens = p.g_ens();
    for (std::size_t m = 0; m < grid.size(); ++m)
        b += (p.g * grid.pop[m] / gens) * Complex(y[2 + 2 * m], y[3 + 2 * m]);
    return b;
}

/// Integrate d a_c/dt = -(kappa + i Dcs) a_c - i sum_m G_m s_m + sqrt(2 kappa) beta(t),
///           d s_m/dt = -(gamma_perp + i delta_m) s_m + i g p_m a_c
/// over one segment. The observer (if given) receives (t, a_c, b) at every
/// accepted integrator step.
inline LinearState evolve_linear(const LinearState& state, const LinearSegment& seg,
                                 const FrequencyGrid& grid, const PhysicalParams& params,
                                 OdeOptions opts = {},
                                 const std::function<void(const LinearSample&)>& observer = {}) {
    const std::size_t m_classes = grid.size();
    if (state.s_minus.size() != m_classes || state.p.size() != m_classes)
        throw ConfigError("evolve_linear: state and grid class counts differ");
    const double gp = seg.gamma_perp_override.value_or(params.gamma_perp());
    const double g = params.g;
    const bool coupled = seg.coupled;
    const double sq2k = std::sqrt(2.0 * seg.kappa);

    // local copies for the RHS closure
    std::vector<double> gm(m_classes), pol = state.p;
    for (std::size_t i = 0; i < m_classes; ++i) gm[i] = g * grid.pop[i];

    auto rhs = [&, gm, pol](double t, const Vector& y, Vector& dy) {
        dy.resize(y.size());
        const Complex a(y[0], y[1]);
        Complex coupling{0.0, 0.0};
        if (coupled) {
            double sr = 0.0, si = 0.0;
            for (std::size_t i = 0; i < m_classes; ++i) {
                sr += gm[i] * y[2 + 2 * i];
                si += gm[i] * y[3 + 2 * i];
            }
            coupling = Complex(0.0, -1.0) * Complex(sr, si);
        }
        Complex da = -(Complex(seg.kappa, seg.delta_cs)) * a + coupling;
        if (seg.drive) da += sq2k * seg.drive(t);
        dy[0] = da.real();
        dy[1] = da.imag();
        for (std::size_t i = 0; i < m_classes; ++i) {
            const Complex s(y[2 + 2 * i], y[3 + 2 * i]);
            Complex ds = -Complex(gp, grid.delta[i]) * s;
            if (coupled) ds += Complex(0.0, 1.0) * (g * pol[i]) * a;
            dy[2 + 2 * i] = ds.real();
            dy[3 + 2 * i] = ds.imag();
        }
    };

    Vector y0;
    detail::pack(state.a_c, state.s_minus, y0);
    Dopri5 solver(rhs, state.t, y0, opts);
    Dopri5::Observer obs;
    if (observer) {
        obs = [&](const Dopri5& s) {
            observer({s.t(), Complex(s.y()[0], s.y()[1]),
                      collective_amplitude_packed(s.y(), grid, params)});
        };
    }
    solver.integrate_to(state.t + seg.duration, obs);

    LinearState out;
    detail::unpack(solver.y(), out.a_c, out.s_minus);
    out.p = state.p;
    out.t = state.t + seg.duration;
    return out;
}

/// Coefficients of the exact two-mode system for Lorentzian broadening:
/// d a_c/dt = -(kappa + i Dcs) a_c - i g_ens b,  d b/dt = -Gamma b - i g_ens a_c.
struct TwoModeSystem {
    Complex cavity_rate;  // kappa + i delta_cs
    double gamma_b;       // Gamma = gamma_perp + w/2
    double g_ens;
};

inline TwoModeSystem two_mode_reduction(const PhysicalParams& params, double kappa,
                                        double delta_cs) {
    return {Complex(kappa, delta_cs), params.big_gamma(), params.g_ens()};
}

struct TwoModeState {
    Complex a_c;
    Complex b;
};

inline TwoModeState evolve_two_mode(const TwoModeSystem& sys, TwoModeState s0, double duration,
                                    OdeOptions opts = {},
                                    const std::function<void(const LinearSample&)>& observer = {}) {
    auto rhs = [&sys](double, const Vector& y, Vector& dy) {
        const Complex a(y[0], y[1]), b(y[2], y[3]);
        const Complex da = -sys.cavity_rate * a - Complex(0.0, sys.g_ens) * b;
        const Complex db = -sys.gamma_b * b - Complex(0.0, sys.g_ens) * a;
        dy.resize(4);
        dy[0] = da.real();
        dy[1] = da.imag();
        dy[2] = db.real();
        dy[3] = db.imag();
    };
    Vector y0(4);
    y0 << s0.a_c.real(), s0.a_c.imag(), s0.b.real(), s0.b.imag();
    Dopri5 solver(rhs, 0.0, y0, opts);
    Dopri5::Observer obs;
    if (observer) {
        obs = [&](const Dopri5& s) {
            observer({s.t(), Complex(s.y()[0], s.y()[1]), Complex(s.y()[2], s.y()[3])});
        };
    }
    solver.integrate_to(duration, obs);
    return {Complex(solver.y()[0], solver.y()[1]), Complex(solver.y()[2], solver.y()[3])};
}

struct PhasePoint {
    double delta;
    double phi;  // <sigma_-> = |<sigma_->| exp(-i phi), unwrapped along delta
};

/// Unwrapped phase-versus-detuning profile. Classes with negligible amplitude
/// are excluded (their phase is undefined).
inline std::vector<PhasePoint> phase_profile(const LinearState& state, const FrequencyGrid& grid,
                                             double amplitude_floor = 0.0) {
    const std::size_t m = grid.size();
    double max_amp = 0.0;
    for (const auto& s : state.s_minus) max_amp = std::max(max_amp, std::abs(s));
    const double floor = amplitude_floor > 0.0 ? amplitude_floor : 1e-12 * max_amp;

    std::vector<PhasePoint> out;
    out.reserve(m);
    // center class first, then unwrap outward in both directions
    const std::size_t mid = m / 2;
    std::vector<double> raw(m, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < m; ++i)
        if (std::abs(state.s_minus[i]) > floor) raw[i] = -std::arg(state.s_minus[i]);

    std::vector<double> phi(m, std::numeric_limits<double>::quiet_NaN());
    auto unwrap_from = [&](std::size_t start, long step) {
        double prev = phi[start];
        for (long i = static_cast<long>(start) + step; i >= 0 && i < static_cast<long>(m);
             i += step) {
            if (std::isnan(raw[i])) continue;
            double d = raw[i] - prev;
            d -= 2.0 * std::numbers::pi * std::round(d / (2.0 * std::numbers::pi));
            phi[i] = prev + d;
            prev = phi[i];
        }
    };
    if (!std::isnan(raw[mid])) {
        phi[mid] = raw[mid];
        unwrap_from(mid, +1);
        unwrap_from(mid, -1);
    }
    for (std::size_t i = 0; i < m; ++i)
        if (!std::isnan(phi[i])) out.push_back({grid.delta[i], phi[i]});
    return out;
}

/// Least-squares slope of phi versus delta inside |delta| <= fit_window, with
/// the offset fixed at pi/2. This slope is the focusing time.
inline double focus_time(const std::vector<PhasePoint>& profile, double fit_window) {
    double num = 0.0, den = 0.0;
    std::size_t count = 0;
    for (const auto& pt : profile) {
        if (std::abs(pt.delta) > fit_window) continue;
        num += pt.delta * (pt.phi - 0.5 * std::numbers::pi);
        den += pt.delta * pt.delta;
        ++count;
    }
    if (count < 5) throw NumericalError("focus_time: fewer than 5 classes in the fit window");
    if (den == 0.0) throw NumericalError("focus_time: degenerate fit window");
    return num / den;
}

/// Default fit window: |delta| below the characteristic rate 1/(2 T_swap).
inline double default_focus_window(double t_swap) { return 0.5 / t_swap; }

}  // namespace spinmem
