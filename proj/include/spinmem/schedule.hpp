#pragma once

// The seven-segment protocol timeline: storage swap, three decoupled waits,
// two inversion pulses, retrieval swap. build_schedule solves the segment
// durations from the total memory time and the selected focusing rule.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "spinmem/closed_forms.hpp"
#include "spinmem/params.hpp"

namespace spinmem {

enum class CouplingMode { Coupled, HardDecoupled };

/// Hyperbolic-secant inversion drive for the intra-cavity field,
/// a_c(t) = a_max sech(beta_sech (t - t_center))^(1 + i mu).
struct DriveSpec {
    enum class Mode { PrescribedIntracavity, ExternalBeta };
    double chi_max = 0.0;     // peak Rabi frequency 2 g a_max
    double beta_sech = 1.0;   // inverse characteristic duration
    double mu = 3.0;          // frequency-profile shape parameter
    double t_center = 0.0;    // absolute center time, filled by the scheduler
    double truncation_window = 0.0;  // 0 -> 16 / beta_sech
    Mode mode = Mode::PrescribedIntracavity;

    double window() const { return truncation_window > 0.0 ? truncation_window : 16.0 / beta_sech; }
    double bandwidth() const { return mu * beta_sech; }
    void validate() const {
        if (!(beta_sech > 0.0)) throw ConfigError("DriveSpec: beta_sech must be > 0");
        if (!(mu > 0.0)) throw ConfigError("DriveSpec: mu must be > 0");
        if (!(window() > 0.0)) throw ConfigError("DriveSpec: truncation window must be > 0");
        if (!(chi_max >= 0.0)) throw ConfigError("DriveSpec: chi_max must be >= 0");
    }
};

/// Instantaneous rotation of every class about an equatorial axis.
struct RotationSpec {
    double axis_x = 0.0, axis_y = 1.0;  // unit vector in the equatorial plane
    double angle = std::numbers::pi;

    void validate() const {
        const double n2 = axis_x * axis_x + axis_y * axis_y;
        if (std::abs(n2 - 1.0) > 1e-9)
            throw ConfigError("RotationSpec: axis must be a unit vector in the equatorial plane");
    }
    static RotationSpec about_y(double angle) { return {0.0, 1.0, angle}; }
    static RotationSpec about_x(double angle) { return {1.0, 0.0, angle}; }
};

struct CavitySegment {
    double kappa = 0.0;
    double delta_cs = 0.0;
    double duration = 0.0;
    CouplingMode coupling = CouplingMode::Coupled;
    std::optional<DriveSpec> drive;        // sech pulse segments
    std::optional<RotationSpec> rotation;  // applied at the segment center

    void validate() const {
        if (!(kappa >= 0.0)) throw ConfigError("CavitySegment: kappa must be >= 0");
        if (!(duration >= 0.0)) throw ConfigError("CavitySegment: duration must be >= 0");
        if (drive) drive->validate();
        if (rotation) rotation->validate();
    }
};

enum class FocusRule { Symmetric, ReverseAware };

struct ProtocolSchedule {
    std::array<CavitySegment, 7> segments;
    double t_mem = 0.0;
    double t_swap = 0.0;
    double t_swap_rev = 0.0;
    double t_focus = 0.0;
    double t_focus_rev = 0.0;
    FocusRule rule = FocusRule::Symmetric;

    double total_duration() const {
        double sum = 0.0;
        for (const auto& s : segments) sum += s.duration;
        return sum;
    }
};

/// Per-role cavity settings from which the scheduler assembles the timeline.
struct SegmentSpecs {
    // storage/retrieval swaps (segments 1 and 7)
    double kappa_swap = 0.0;
    double delta_cs_swap = 0.0;
    bool with_swaps = true;  // false: state starts in the ensemble (spectator runs)

    // decoupled waits (segments 2, 4, 6); segment 4 may flip the detuning sign
    double kappa_wait = 0.0;
    double delta_cs_wait = 0.0;
    std::optional<double> delta_cs_wait_mid;  // default: -delta_cs_wait
    bool hard_decoupled_waits = true;

    // inversion pulses (segments 3 and 5)
    enum class PulseKind { IdealRotation, AbruptRotation, Sech };
    PulseKind pulse_kind = PulseKind::IdealRotation;
    RotationSpec rotation = RotationSpec::about_y(std::numbers::pi);
    RotationSpec rotation_second = RotationSpec::about_y(std::numbers::pi);
    double abrupt_window = 0.0;  // low-Q duration around an abrupt rotation (typ. 12/w)
    double kappa_pulse = 0.0;
    double delta_cs_pulse = 0.0;
    DriveSpec sech;  // template for both pulses (t_center filled per segment)

    // focusing times; when absent the crude estimate (2/3) t_swap is used
    std::optional<double> t_focus;
    std::optional<double> t_focus_rev;

    double pulse_duration() const {
        switch (pulse_kind) {
            case PulseKind::IdealRotation: return 0.0;
            case PulseKind::AbruptRotation: return abrupt_window;
            case PulseKind::Sech: return sech.window();
        }
        return 0.0;
    }
};

/// Solve the timeline
///   T1 = t_swap, T7 = t_swap (or t_swap_rev), T2 = T6, T3 = T5 = pulse window,
///   sum_i T_i = t_mem,
///   t_focus + t_focus' + sum_{i=2..6} T_i = 2 T4
/// where t_focus' = t_focus (symmetric) or t_focus_rev (reverse-aware).
inline ProtocolSchedule build_schedule(double t_mem, const PhysicalParams& params,
                                       const SegmentSpecs& specs, FocusRule rule) {
    params.validate();
    ProtocolSchedule sch;
    sch.rule = rule;
    sch.t_mem = t_mem;

    if (specs.with_swaps) {
        sch.t_swap = swap_time(params, specs.kappa_swap, false);
        sch.t_swap_rev = swap_time(params, specs.kappa_swap, true);
        const double crude = 2.0 / 3.0 * sch.t_swap;
        sch.t_focus = specs.t_focus.value_or(crude);
        sch.t_focus_rev = specs.t_focus_rev.value_or(
            rule == FocusRule::ReverseAware ? 2.0 / 3.0 * sch.t_swap_rev : crude);
    } else {
        // state prepared directly in the ensemble: the focus point is t = 0
        sch.t_swap = sch.t_swap_rev = 0.0;
        sch.t_focus = specs.t_focus.value_or(0.0);
        sch.t_focus_rev = specs.t_focus_rev.value_or(0.0);
    }

    const double t1 = specs.with_swaps ? sch.t_swap : 0.0;
    const double t7 = specs.with_swaps
                          ? (rule == FocusRule::ReverseAware ? sch.t_swap_rev : sch.t_swap)
                          : 0.0;
    const double tf_sum = (rule == FocusRule::ReverseAware)
                              ? sch.t_focus + sch.t_focus_rev
                              : 2.0 * sch.t_focus;
    const double tp = specs.pulse_duration();

    const double t2 = (t_mem - t1 - t7 - tf_sum - 4.0 * tp) / 4.0;
    if (t2 < -1e-12 * std::max(1.0, t_mem))
        throw ScheduleError("build_schedule: t_mem too short, decoupling duration negative");
    const double t2c = std::max(t2, 0.0);
    const double t4 = tf_sum + 2.0 * t2c + 2.0 * tp;

    auto wait = [&](double dcs) {
        CavitySegment s;
        s.kappa = specs.kappa_wait;
        s.delta_cs = dcs;
        s.coupling = specs.hard_decoupled_waits ? CouplingMode::HardDecoupled
                                                : CouplingMode::Coupled;
        return s;
    };
    CavitySegment swap;
    swap.kappa = specs.kappa_swap;
    swap.delta_cs = specs.delta_cs_swap;
    swap.coupling = CouplingMode::Coupled;

    auto pulse = [&](bool first) {
        CavitySegment s;
        s.kappa = specs.kappa_pulse;
        s.delta_cs = specs.delta_cs_pulse;
        s.coupling = CouplingMode::Coupled;
        s.duration = tp;
        if (specs.pulse_kind == SegmentSpecs::PulseKind::Sech) {
            s.drive = specs.sech;  // t_center assigned below
        } else {
            s.rotation = first ? specs.rotation : specs.rotation_second;
            if (specs.pulse_kind == SegmentSpecs::PulseKind::IdealRotation)
                s.kappa = 0.0;  // instantaneous, no cavity exposure
        }
        return s;
    };

    sch.segments[0] = swap;
    sch.segments[0].duration = t1;
    sch.segments[1] = wait(specs.delta_cs_wait);
    sch.segments[1].duration = t2c;
    sch.segments[2] = pulse(true);
    sch.segments[3] = wait(specs.delta_cs_wait_mid.value_or(-specs.delta_cs_wait));
    sch.segments[3].duration = t4;
    sch.segments[4] = pulse(false);
    sch.segments[5] = wait(specs.delta_cs_wait);
    sch.segments[5].duration = t2c;
    sch.segments[6] = swap;
    sch.segments[6].duration = t7;

    // absolute pulse centers
    double t_abs = 0.0;
    for (auto& s : sch.segments) {
        if (s.drive) s.drive->t_center = t_abs + 0.5 * s.duration;
        t_abs += s.duration;
    }
    for (auto& s : sch.segments) s.validate();
    return sch;
}

/// The pure spin-refocusing timeline with the cavity as a spectator:
/// T2 = T6 = T, T4 = 2T, t_mem = 4T, ideal instantaneous inversions,
/// constant kappa, detuning delta_cs in parts 2 and 6 and delta_cs_mid in 4.
inline ProtocolSchedule spectator_schedule(double quarter_time, double kappa, double delta_cs,
                                           double delta_cs_mid, const PhysicalParams& params) {
    SegmentSpecs specs;
    specs.with_swaps = false;
    specs.kappa_wait = kappa;
    specs.delta_cs_wait = delta_cs;
    specs.delta_cs_wait_mid = delta_cs_mid;
    specs.hard_decoupled_waits = false;
    specs.pulse_kind = SegmentSpecs::PulseKind::IdealRotation;
    specs.rotation = RotationSpec::about_x(std::numbers::pi);
    specs.rotation_second = RotationSpec::about_x(std::numbers::pi);
    return build_schedule(4.0 * quarter_time, params, specs, FocusRule::Symmetric);
}

}  // namespace spinmem
