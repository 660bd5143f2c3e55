#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "spinmem/decay_forms.hpp"
#include "spinmem/grid.hpp"
#include "spinmem/linear.hpp"
#include "spinmem/moments.hpp"

using namespace spinmem;

namespace {

PhysicalParams ref_params(double g_ens_over_gamma = 2.5, double gamma_perp = 0.0) {
    const double gamma = gamma_perp + 0.5;
    return PhysicalParams::from_g_ens(1.0, gamma_perp > 0.0 ? 1.0 / gamma_perp : kInfinity,
                                      6.25e10, g_ens_over_gamma * gamma);
}

/// Homogeneous-equivalent parameters: a single class at delta = 0 whose
/// per-spin decoherence plays the role of the Lorentzian Gamma.
PhysicalParams homogeneous_equivalent(double cooperativity, double kappa) {
    const double gamma = kappa;  // used with kappa = Gamma below
    return PhysicalParams::from_g_ens(1e-12, 1.0 / gamma, 6.25e10,
                                      std::sqrt(cooperativity * kappa * gamma));
}

CavitySegment resonant_coupled(double kappa, double duration) {
    CavitySegment s;
    s.kappa = kappa;
    s.duration = duration;
    return s;
}

}  // namespace

TEST_CASE("vacuum ground state is a fixed point") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 5.0, 0.5);
    auto st = SystemState::cavity_input({0.0, 0.0}, grid, true);
    auto out = evolve_moments(st, resonant_coupled(0.3, 4.0), grid, p);
    CHECK(out.mean.head(2).norm() < 1e-12);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        CHECK(std::abs(out.sx(m)) < 1e-12);
        CHECK(out.sz(m) == Catch::Approx(-1.0).margin(1e-10));
    }
    auto noise = noise_observables(out, grid);
    CHECK(std::abs(noise.resn) < 1e-8);
    CHECK(std::abs(noise.ren) < 1e-8);
    CHECK(noise.excitation < 1e-10);
}

TEST_CASE("means coincide with the linear evolution in the linear regime") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 8.0, 0.4);
    const Complex alpha{0.7, -0.2};

    auto st = SystemState::cavity_input(alpha, grid, false);
    CavitySegment seg = resonant_coupled(0.2, 1.5);
    auto out = evolve_moments(st, seg, grid, p, {{1e-11, 1e-14}});

    LinearState lin = LinearState::cavity_input(alpha, grid);
    LinearSegment lseg;
    lseg.kappa = 0.2;
    lseg.duration = 1.5;
    auto lout = evolve_linear(lin, lseg, grid, p, {1e-11, 1e-14});

    CHECK(std::abs(out.cavity_mean() - lout.a_c) < 1e-8);
    for (std::size_t m = 0; m < grid.size(); m += 3)
        CHECK(std::abs(out.s_minus(m) - lout.s_minus[m]) < 1e-8);
}

TEST_CASE("covariance propagation reproduces the inverted-ensemble transients") {
    // Homogeneous-equivalent single class: this pins the diffusion matrix.
    for (double c : {0.1, 0.63}) {
        auto q = homogeneous_equivalent(c, 0.5);
        const double kappa = q.big_gamma();
        auto grid = build_frequency_grid(q, 0.0, 0.0);
        auto st = SystemState::inverted_vacuum(grid, true);

        std::vector<SystemState> samples;
        MomentOptions opts;
        opts.ode = {1e-10, 1e-13};
        opts.sample_dt = 1.0;
        evolve_moments(st, resonant_coupled(kappa, 6.0), grid, q, opts,
                       [&](const SystemState& s) { samples.push_back(s); });
        for (const auto& s : samples) {
            auto expect = transient_variance_closed_form(s.t, q, kappa);
            CHECK(s.cov(0, 0) == Catch::Approx(expect.var_xc).epsilon(1e-7));
            CHECK(s.cov(1, 1) == Catch::Approx(expect.var_xc).epsilon(1e-7));
            // normalized spin block: Var Sx / N
            CHECK(s.cov(2, 2) ==
                  Catch::Approx(expect.var_sx_eff / q.n_spins).epsilon(1e-7));
        }
    }
}

TEST_CASE("inverted means on the grid approach the closed form") {
    auto p = homogeneous_equivalent(1.0, 1.0);  // placeholder, rebuilt below
    // C = 0.63 with kappa = Gamma on the true Lorentzian grid
    PhysicalParams q =
        PhysicalParams::from_g_ens(1.0, kInfinity, 6.25e10, std::sqrt(0.63 * 0.5 * 0.5));
    const double kappa = q.big_gamma();
    auto grid = build_frequency_grid(q, 100.0 * q.big_gamma(), 0.2);

    LinearState st = LinearState::cavity_input({1.0, 0.0}, grid, +1.0);
    LinearSegment seg;
    seg.kappa = kappa;
    seg.duration = 2.0 / q.big_gamma();
    double worst = 0.0, sup = 0.0;
    evolve_linear(st, seg, grid, q, {1e-10, 1e-13}, [&](const LinearSample& s) {
        auto cf = inverted_decay_closed_form(s.t, {1.0, 0.0}, q, kappa);
        // b = S_-^eff / sqrt(N) in collective units
        const Complex s_eff = s.b * std::sqrt(q.n_spins);
        worst = std::max(worst, std::abs(s_eff - cf.s_minus_eff));
        sup = std::max(sup, std::abs(cf.s_minus_eff));
    });
    CHECK(worst / sup < 0.01);
    (void)p;
}

TEST_CASE("grid covariance approaches the transient formulas") {
    PhysicalParams q =
        PhysicalParams::from_g_ens(1.0, kInfinity, 6.25e10, std::sqrt(0.63 * 0.5 * 0.5));
    const double kappa = q.big_gamma();
    auto grid = build_frequency_grid(q, 20.0 * q.big_gamma(), 0.26);
    auto st = SystemState::inverted_vacuum(grid, true);

    MomentOptions opts;
    opts.ode = {1e-7, 1e-10};
    auto out = evolve_moments(st, resonant_coupled(kappa, 6.0), grid, q, opts);
    auto expect = transient_variance_closed_form(6.0, q, kappa);
    CHECK(out.cov(0, 0) == Catch::Approx(expect.var_xc).epsilon(0.04));
    auto noise = noise_observables(out, grid);
    // RESN = Var S_x^eff / N - 1 for the full ensemble
    CHECK(1.0 + noise.resn == Catch::Approx(expect.var_sx_eff / q.n_spins).epsilon(0.05));

    // Heisenberg floor on the cavity block
    const double det = out.cov(0, 0) * out.cov(1, 1) - out.cov(0, 1) * out.cov(1, 0);
    CHECK(det >= 0.25 * (1.0 - 1e-9));
}

TEST_CASE("detuned steady state matches the generalized formulas") {
    auto q = homogeneous_equivalent(0.4, 0.5);
    const double kappa = q.big_gamma();
    const double delta_cs = 0.8;
    auto grid = build_frequency_grid(q, 0.0, 0.0);
    auto st = SystemState::inverted_vacuum(grid, true);

    CavitySegment seg = resonant_coupled(kappa, 80.0);
    seg.delta_cs = delta_cs;
    MomentOptions opts;
    opts.ode = {1e-10, 1e-13};
    auto out = evolve_moments(st, seg, grid, q, opts);
    auto ss = steady_state_noise(q, kappa, delta_cs);
    CHECK(out.cov(0, 0) == Catch::Approx(ss.var_cavity_quadrature).epsilon(1e-4));
    CHECK(out.cov(2, 2) == Catch::Approx(ss.var_spin_quadrature / q.n_spins).epsilon(1e-4));
}

TEST_CASE("hard decoupling freezes isotropic spin covariance") {
    auto p = ref_params(2.5, 0.0);
    auto grid = build_frequency_grid(p, 4.0, 0.8);
    auto st = SystemState::cavity_input({0.3, 0.1}, grid, true);
    st.cov(0, 0) = 0.9;  // non-vacuum cavity block
    CavitySegment seg;
    seg.kappa = 0.6;
    seg.duration = 3.0;
    seg.coupling = CouplingMode::HardDecoupled;
    auto out = evolve_moments(st, seg, grid, p, {{1e-10, 1e-13}});

    for (std::size_t m = 0; m < grid.size(); ++m) {
        const Eigen::Index i = 2 + 3 * static_cast<Eigen::Index>(m);
        CHECK(out.cov(i, i) == Catch::Approx(1.0).margin(1e-9));
        CHECK(out.cov(i + 1, i + 1) == Catch::Approx(1.0).margin(1e-9));
        CHECK(std::abs(out.cov(i, i + 1)) < 1e-9);
    }
    // cavity variance relaxes toward vacuum at rate 2 kappa
    const double expect = 0.5 + (0.9 - 0.5) * std::exp(-2.0 * 0.6 * 3.0);
    CHECK(out.cov(0, 0) == Catch::Approx(expect).epsilon(1e-6));
    // inverted + decoupled: no noise exchange
    auto inv = SystemState::inverted_vacuum(grid, true);
    auto inv_out = evolve_moments(inv, seg, grid, p, {{1e-10, 1e-13}});
    CHECK(std::abs(noise_observables(inv_out, grid).resn) < 1e-9);
}

TEST_CASE("noise observables") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 5.0, 0.5);

    SECTION("coherent spin state carries no excess noise") {
        auto st = SystemState::spin_input({0.5, 0.2}, grid, p, true);
        CHECK(std::abs(noise_observables(st, grid).resn) < 1e-12);
    }

    SECTION("excitation bookkeeping") {
        auto ground = SystemState::cavity_input({0.0, 0.0}, grid, false);
        CHECK(noise_observables(ground, grid).excitation == Catch::Approx(0.0).margin(1e-14));
        auto inv = SystemState::inverted_vacuum(grid, false);
        CHECK(noise_observables(inv, grid).excitation == Catch::Approx(1.0));
    }

    SECTION("normalized noise is independent of N") {
        auto run = [&](double n_spins) {
            PhysicalParams q = PhysicalParams::from_g_ens(1.0, kInfinity, n_spins, 1.25);
            auto g = build_frequency_grid(q, 5.0, 0.5);
            auto st = SystemState::inverted_vacuum(g, true);
            CavitySegment seg = resonant_coupled(3.2, 2.0);
            auto out = evolve_moments(st, seg, g, q, {{1e-10, 1e-13}});
            return noise_observables(out, g);
        };
        auto a = run(1e6);
        auto b = run(6.25e10);
        CHECK(a.resn == Catch::Approx(b.resn).epsilon(1e-8));
        CHECK(a.ren == Catch::Approx(b.ren).epsilon(1e-8));
    }
}

TEST_CASE("covariance positivity is enforced") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 2.0, 1.0);
    auto st = SystemState::cavity_input({0.0, 0.0}, grid, true);
    st.cov(0, 0) = -1.0;  // manifestly indefinite
    CHECK_THROWS_AS(evolve_moments(st, resonant_coupled(0.1, 0.5), grid, p), NumericalError);
}

TEST_CASE("sampler fires at the requested cadence") {
    auto p = ref_params();
    auto grid = build_frequency_grid(p, 2.0, 1.0);
    auto st = SystemState::cavity_input({0.2, 0.0}, grid, false);
    MomentOptions opts;
    opts.sample_dt = 0.25;
    std::vector<double> times;
    evolve_moments(st, resonant_coupled(0.0, 1.0), grid, p, opts,
                   [&](const SystemState& s) { times.push_back(s.t); });
    REQUIRE(times.size() == 4);
    CHECK(times.front() == Catch::Approx(0.25));
    CHECK(times.back() == Catch::Approx(1.0));
}
