#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "spinmem/closed_forms.hpp"
#include "spinmem/grid.hpp"
#include "spinmem/linear.hpp"

using namespace spinmem;

namespace {
PhysicalParams ref_params(double g_ens_over_gamma = 2.5, double gamma_perp = 0.0) {
    const double gamma = gamma_perp + 0.5;
    return PhysicalParams::from_g_ens(1.0, gamma_perp > 0.0 ? 1.0 / gamma_perp : kInfinity,
                                      6.25e10, g_ens_over_gamma * gamma);
}
}  // namespace

TEST_CASE("ideal two-mode swap exchanges cos/sin") {
    // single class, kappa = gamma_perp = Dcs = delta = 0
    PhysicalParams p = PhysicalParams::from_g_ens(1.0, kInfinity, 1e8, 1.0);
    auto grid = build_frequency_grid(p, 0.0, 0.0);
    LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
    LinearSegment seg;
    seg.duration = 0.8;
    auto out = evolve_linear(st, seg, grid, p, {1e-11, 1e-14});
    CHECK(out.a_c.real() == Catch::Approx(std::cos(p.g_ens() * 0.8)).margin(1e-8));
    const Complex b = collective_amplitude(out, grid, p);
    CHECK(b.imag() == Catch::Approx(-std::sin(p.g_ens() * 0.8)).margin(1e-8));
    CHECK(std::abs(b.real()) < 1e-9);
}

TEST_CASE("hard decoupling rotates classes freely") {
    auto p = ref_params(2.5, 0.08);
    auto grid = build_frequency_grid(p, 3.0, 0.7);
    LinearState st = LinearState::cavity_input({0.4, -0.3}, grid);
    for (std::size_t m = 0; m < grid.size(); ++m)
        st.s_minus[m] = Complex(0.1, 0.05 * static_cast<double>(m));
    LinearSegment seg;
    seg.kappa = 0.3;
    seg.delta_cs = 2.0;
    seg.duration = 1.7;
    seg.coupled = false;
    auto out = evolve_linear(st, seg, grid, p, {1e-11, 1e-14});
    const Complex ac_expect = Complex(0.4, -0.3) * std::exp(-Complex(0.3, 2.0) * 1.7);
    CHECK(std::abs(out.a_c - ac_expect) < 1e-9);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const Complex expect =
            st.s_minus[m] * std::exp(-Complex(p.gamma_perp(), grid.delta[m]) * 1.7);
        CHECK(std::abs(out.s_minus[m] - expect) < 1e-9);
    }
}

TEST_CASE("grid simulation matches the swap closed form") {
    // The renormalized truncated Lorentzian deviates from the exact-Lorentzian
    // closed form by a secular scale error of order (tail mass) ~ w/(pi dcut);
    // the deviation must shrink with the cut-off.
    auto p = ref_params();
    const double gamma = p.big_gamma();
    const double t_swap = swap_time(p, 0.0);

    auto max_deviation = [&](double delta_cut, double d_delta) {
        auto grid = build_frequency_grid(p, delta_cut, d_delta);
        LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
        LinearSegment seg;
        seg.duration = t_swap;
        double worst_a = 0.0, sup_a = 0.0;
        auto obs = [&](const LinearSample& s) {
            auto cf = swap_closed_form(s.t, {1.0, 0.0}, p, 0.0);
            worst_a = std::max(worst_a, std::abs(s.a_c - cf.a_c));
            sup_a = std::max(sup_a, std::abs(cf.a_c));
        };
        evolve_linear(st, seg, grid, p, {1e-10, 1e-13}, obs);
        return worst_a / sup_a;
    };
    const double err100 = max_deviation(100.0 * gamma, 100.0 * gamma / 2000.0);
    const double err400 = max_deviation(400.0 * gamma, 0.1);
    CHECK(err100 < 5e-3);
    CHECK(err400 < 1.5e-3);
    CHECK(err400 < 0.5 * err100);
}

TEST_CASE("two-mode reduction") {
    SECTION("coefficients") {
        auto p = ref_params();
        auto sys = two_mode_reduction(p, 0.2, 0.0);
        CHECK(sys.gamma_b == Catch::Approx(0.5));  // gamma_perp = 0 -> w/2
        CHECK(sys.g_ens == Catch::Approx(p.g_ens()));
        CHECK(sys.cavity_rate == Complex(0.2, 0.0));
    }

    SECTION("grid collective amplitude converges to the two-mode solution") {
        auto p = ref_params();
        const double gamma = p.big_gamma();
        auto sys = two_mode_reduction(p, 0.0, 0.0);

        double prev_err = kInfinity;
        for (double cut_over_gamma : {25.0, 100.0}) {
            auto grid = build_frequency_grid(p, cut_over_gamma * gamma,
                                             cut_over_gamma * gamma / 1500.0);
            LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
            LinearSegment seg;
            seg.duration = 5.0 / gamma;
            std::vector<LinearSample> samples;
            evolve_linear(st, seg, grid, p, {1e-9, 1e-12},
                          [&](const LinearSample& s) { samples.push_back(s); });
            double worst = 0.0, sup = 0.0;
            for (const auto& s : samples) {
                auto tm = evolve_two_mode(sys, {{1.0, 0.0}, {0.0, 0.0}}, s.t, {1e-10, 1e-13});
                worst = std::max(worst, std::abs(s.b - tm.b));
                sup = std::max(sup, std::abs(tm.b));
            }
            const double rel = worst / sup;
            CHECK(rel < prev_err);
            prev_err = rel;
        }
        CHECK(prev_err < 0.01);
    }

    SECTION("two-mode solution equals the closed form pointwise") {
        auto p = ref_params(3.0, 0.1);
        const double kappa = 0.4;
        auto sys = two_mode_reduction(p, kappa, 0.0);
        for (double t : {0.3, 0.9, 1.7}) {
            auto tm = evolve_two_mode(sys, {{1.0, 0.0}, {0.0, 0.0}}, t, {1e-11, 1e-14});
            auto cf = swap_closed_form(t, {1.0, 0.0}, p, kappa);
            CHECK(std::abs(tm.a_c - cf.a_c) < 1e-9);
            CHECK(std::abs(tm.b - cf.b) < 1e-9);
        }
    }
}

TEST_CASE("excitation conservation in the lossless limit") {
    // kappa = gamma_perp = 0 and negligible w: |a|^2 + |b|^2 is constant
    PhysicalParams p = PhysicalParams::from_g_ens(1e-9, kInfinity, 1e8, 1.3);
    auto grid = build_frequency_grid(p, 0.0, 0.0);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        LinearState st = LinearState::cavity_input({u(rng), u(rng)}, grid);
        st.s_minus[0] = Complex(u(rng), u(rng)) / std::sqrt(p.n_spins);
        const double e0 = std::norm(st.a_c) + std::norm(collective_amplitude(st, grid, p));
        LinearSegment seg;
        seg.duration = 2.3;
        double worst = 0.0;
        evolve_linear(st, seg, grid, p, {1e-11, 1e-14}, [&](const LinearSample& s) {
            worst = std::max(worst, std::abs(std::norm(s.a_c) + std::norm(s.b) - e0));
        });
        CHECK(worst < 1e-8 * std::max(e0, 1.0));
    }
}

TEST_CASE("phase profile after the storage swap") {
    auto p = ref_params();
    const double gamma = p.big_gamma();
    auto grid = build_frequency_grid(p, 50.0 * gamma, 0.02);
    const double t_swap = swap_time(p, 0.0);
    LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
    LinearSegment seg;
    seg.duration = t_swap;
    auto out = evolve_linear(st, seg, grid, p, {1e-10, 1e-13});
    auto profile = phase_profile(out, grid);
    REQUIRE(profile.size() == grid.size());

    SECTION("center class sits exactly at pi/2") {
        const auto& center = profile[profile.size() / 2];
        CHECK(center.delta == 0.0);
        CHECK(center.phi == Catch::Approx(0.5 * std::numbers::pi).margin(1e-9));
    }

    SECTION("phi - pi/2 is odd in delta") {
        for (std::size_t i = 0; i < profile.size(); ++i) {
            const auto& a = profile[i];
            const auto& b = profile[profile.size() - 1 - i];
            CHECK(a.phi - 0.5 * std::numbers::pi ==
                  Catch::Approx(-(b.phi - 0.5 * std::numbers::pi)).margin(1e-7));
        }
    }

    SECTION("small-detuning slope approximates (2/3) T_swap") {
        const double tf = focus_time(profile, default_focus_window(t_swap));
        CHECK(tf == Catch::Approx(2.0 / 3.0 * t_swap).epsilon(0.15));
    }

    SECTION("large-detuning phase follows delta * T_swap modulo pi") {
        for (const auto& pt : profile) {
            if (std::abs(pt.delta) < 20.0 / t_swap) continue;
            const double expect = pt.delta * t_swap;
            const double diff = std::remainder(pt.phi - expect, std::numbers::pi);
            CHECK(std::abs(diff) < 0.08);
        }
    }
}

TEST_CASE("focus time") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 10.0, 0.05);

    SECTION("free evolution of duration t fits exactly t") {
        LinearState st = LinearState::cavity_input({0.0, 0.0}, grid);
        for (auto& s : st.s_minus) s = Complex(0.0, -0.25e-5);  // phi(0) = pi/2
        LinearSegment seg;
        seg.duration = 1.23;
        seg.coupled = false;
        auto out = evolve_linear(st, seg, grid, p, {1e-11, 1e-14});
        const double tf = focus_time(phase_profile(out, grid), 0.4);
        CHECK(tf == Catch::Approx(1.23).epsilon(1e-6));
    }

    SECTION("reverse-rate swap yields a different focusing time when kappa > 0") {
        const double kappa = 1.0;
        const double ts_f = swap_time(p, kappa, false);
        const double ts_r = swap_time(p, kappa, true);

        auto run = [&](bool reverse) {
            LinearState st = LinearState::cavity_input({1.0, 0.0}, grid);
            LinearSegment seg;
            seg.kappa = reverse ? -kappa : kappa;
            seg.duration = reverse ? ts_r : ts_f;
            if (reverse) seg.gamma_perp_override = -p.gamma_perp();
            auto out = evolve_linear(st, seg, grid, p, {1e-10, 1e-13});
            return focus_time(phase_profile(out, grid),
                              default_focus_window(reverse ? ts_r : ts_f));
        };
        const double tf_fwd = run(false);
        const double tf_rev = run(true);
        CHECK(tf_fwd != Catch::Approx(tf_rev).epsilon(1e-3));
        CHECK(tf_rev > 0.0);
        CHECK(tf_rev < 2.0 * ts_r);
    }

    SECTION("window devoid of classes throws") {
        std::vector<PhasePoint> profile = {{-3.0, 1.0}, {3.0, 2.0}};
        CHECK_THROWS_AS(focus_time(profile, 0.1), NumericalError);
    }
}
