#pragma once

// Nonlinear mean-field (Maxwell-Bloch) evolution with sigma_z dynamics plus
// linearized propagation of the symmetric covariance matrix. The covariance
// lives on the basis (X_c, P_c, {X_m, Y_m, Z_m}) where the class blocks are
// collective operators normalized by sqrt(pop_m), so vacuum/coherent spin
// blocks carry unit variance and all entries stay O(1) independent of N.
//
// Drift: dC/dt = A C + C A^T + D with A the Jacobian of the mean-field drift
// at the instantaneous means. The diffusion D follows from the two Lindblad
// channels, cavity leakage sqrt(2 kappa) a_c and per-spin dephasing
// sigma_z / sqrt(2 tau):
//   D = diag(kappa, kappa, {2 gamma_perp, 2 gamma_perp, 0} per class),
// which reproduces the inverted-ensemble variance formulas exactly (the
// oracle pinning this derivation lives in the test suite).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "spinmem/grid.hpp"
#include "spinmem/ode.hpp"
#include "spinmem/params.hpp"
#include "spinmem/pulses.hpp"
#include "spinmem/schedule.hpp"

namespace spinmem {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SystemState {
    double t = 0.0;
    Vector mean;     // [X_c, P_c, sx_0, sy_0, sz_0, ...] with per-spin Bloch means
    RowMatrix cov;   // (2+3M)^2 normalized covariance; 0x0 when not tracked

    std::size_t n_classes() const { return (static_cast<std::size_t>(mean.size()) - 2) / 3; }
    bool has_cov() const { return cov.size() > 0; }

    Complex cavity_mean() const { return Complex(mean[0], mean[1]) / std::sqrt(2.0); }
    void set_cavity_mean(Complex a) {
        mean[0] = std::sqrt(2.0) * a.real();
        mean[1] = std::sqrt(2.0) * a.imag();
    }
    double sx(std::size_t m) const { return mean[2 + 3 * m]; }
    double sy(std::size_t m) const { return mean[3 + 3 * m]; }
    double sz(std::size_t m) const { return mean[4 + 3 * m]; }
    Complex s_minus(std::size_t m) const { return 0.5 * Complex(sx(m), -sy(m)); }

    /// Ground ensemble (sz = -1) with a coherent cavity amplitude.
    static SystemState cavity_input(Complex alpha, const FrequencyGrid& grid,
                                    bool with_covariance) {
        SystemState st;
        const std::size_t m = grid.size();
        st.mean = Vector::Zero(2 + 3 * m);
        st.set_cavity_mean(alpha);
        for (std::size_t i = 0; i < m; ++i) st.mean[4 + 3 * i] = -1.0;
        if (with_covariance) st.cov = vacuum_covariance(m);
        return st;
    }

    /// Fully inverted ensemble (sz = +1), vacuum cavity.
    static SystemState inverted_vacuum(const FrequencyGrid& grid, bool with_covariance) {
        SystemState st = cavity_input({0.0, 0.0}, grid, with_covariance);
        for (std::size_t i = 0; i < grid.size(); ++i) st.mean[4 + 3 * i] = +1.0;
        return st;
    }

    /// Coherent spin state with collective amplitude b0 (linear regime),
    /// vacuum cavity. Every class carries the same per-spin coherence.
    static SystemState spin_input(Complex b0, const FrequencyGrid& grid,
                                  const PhysicalParams& params, bool with_covariance) {
        SystemState st = cavity_input({0.0, 0.0}, grid, with_covariance);
        const Complex s = b0 / std::sqrt(params.n_spins);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double sx = 2.0 * s.real(), sy = -2.0 * s.imag();
            st.mean[2 + 3 * i] = sx;
            st.mean[3 + 3 * i] = sy;
            st.mean[4 + 3 * i] = -std::sqrt(std::max(0.0, 1.0 - sx * sx - sy * sy));
        }
        return st;
    }

    static RowMatrix vacuum_covariance(std::size_t m_classes) {
        const Eigen::Index n = static_cast<Eigen::Index>(2 + 3 * m_classes);
        RowMatrix c = RowMatrix::Zero(n, n);
        c(0, 0) = c(1, 1) = 0.5;
        for (std::size_t i = 0; i < m_classes; ++i) {
            c(2 + 3 * i, 2 + 3 * i) = 1.0;
            c(3 + 3 * i, 3 + 3 * i) = 1.0;
        }
        return c;
    }
};

struct NoiseObservables {
    double resn = 0.0;        // (1/2N) <dS_x^2 + dS_y^2> over the full ensemble, minus 1
    double ren = 0.0;         // 2 sigma^2 - 1 of the cavity quadratures
    double excitation = 0.0;  // population-weighted mean of (1 + sz)/2
};

inline NoiseObservables noise_observables(const SystemState& st, const FrequencyGrid& grid) {
    NoiseObservables out;
    const std::size_t m = grid.size();
    for (std::size_t i = 0; i < m; ++i)
        out.excitation += grid.weight[i] * 0.5 * (1.0 + st.sz(i));
    if (!st.has_cov()) return out;

    out.ren = st.cov(0, 0) + st.cov(1, 1) - 1.0;
    // full-ensemble variance including cross-class covariance blocks
    double vxx = 0.0, vyy = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        const double wa = std::sqrt(grid.weight[a]);
        const Eigen::Index ia = 2 + 3 * static_cast<Eigen::Index>(a);
        for (std::size_t b = 0; b < m; ++b) {
            const double ww = wa * std::sqrt(grid.weight[b]);
            const Eigen::Index ib = 2 + 3 * static_cast<Eigen::Index>(b);
            vxx += ww * st.cov(ia, ib);
            vyy += ww * st.cov(ia + 1, ib + 1);
        }
    }
    out.resn = 0.5 * (vxx + vyy) - 1.0;
    return out;
}

struct MomentOptions {
    OdeOptions ode{1e-9, 1e-12};
    double sample_dt = 0.0;    // 0: no interior samples
    bool check_psd = true;     // verify positive semidefiniteness at samples
    double psd_floor = 1e-9;   // relative eigenvalue floor (fraction of trace)
};

using MomentSampler = std::function<void(const SystemState&)>;

namespace detail {

struct MomentWorkspace {
    RowMatrix u;  // scratch for A * C
};

/// Right-hand side of means + covariance for one protocol segment.
class MomentRhs {
public:
    MomentRhs(const CavitySegment& seg, const FrequencyGrid& grid, const PhysicalParams& params,
              bool with_cov, std::shared_ptr<const SechPulse> presc,
              std::function<Complex(double)> beta)
        : grid_(&grid),
          with_cov_(with_cov),
          kappa_(seg.kappa),
          dcs_(seg.delta_cs),
          coupled_(seg.coupling == CouplingMode::Coupled),
          gperp_(params.gamma_perp()),
          g_(params.g),
          presc_(std::move(presc)),
          beta_(std::move(beta)),
          ws_(std::make_shared<MomentWorkspace>()) {
        const std::size_t m = grid.size();
        gcol_.resize(m);
        gpop_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            gcol_[i] = g_ * std::sqrt(grid.pop[i]);
            gpop_[i] = g_ * grid.pop[i];
        }
    }

    void operator()(double t, const Vector& y, Vector& dy) const {
        const std::size_t m = grid_->size();
        const Eigen::Index nm = static_cast<Eigen::Index>(2 + 3 * m);
        dy.resize(y.size());

        // cavity quadrature means: prescribed trajectory overrides the state
        double xc, pc;
        Complex da_presc{0.0, 0.0};
        if (presc_) {
            const Complex a = presc_->amplitude(t);
            xc = std::sqrt(2.0) * a.real();
            pc = std::sqrt(2.0) * a.imag();
            da_presc = presc_->derivative(t);
        } else {
            xc = y[0];
            pc = y[1];
        }

        // --- means
        double sum_gx = 0.0, sum_gy = 0.0;
        if (coupled_) {
            for (std::size_t i = 0; i < m; ++i) {
                sum_gx += gpop_[i] * y[2 + 3 * i];
                sum_gy += gpop_[i] * y[3 + 3 * i];
            }
        }
        if (presc_) {
            dy[0] = std::sqrt(2.0) * da_presc.real();
            dy[1] = std::sqrt(2.0) * da_presc.imag();
        } else {
            dy[0] = -kappa_ * xc + dcs_ * pc - sum_gy / std::sqrt(2.0);
            dy[1] = -kappa_ * pc - dcs_ * xc - sum_gx / std::sqrt(2.0);
            if (beta_) {
                const Complex drive = std::sqrt(2.0 * kappa_) * beta_(t);
                dy[0] += std::sqrt(2.0) * drive.real();
                dy[1] += std::sqrt(2.0) * drive.imag();
            }
        }
        const double sq2g = std::sqrt(2.0) * g_;
        for (std::size_t i = 0; i < m; ++i) {
            const double sx = y[2 + 3 * i], sy = y[3 + 3 * i], sz = y[4 + 3 * i];
            const double d = grid_->delta[i];
            double dsx = -gperp_ * sx - d * sy;
            double dsy = -gperp_ * sy + d * sx;
            double dsz = 0.0;
            if (coupled_) {
                dsx -= sq2g * sz * pc;
                dsy -= sq2g * sz * xc;
                dsz = sq2g * (sx * pc + sy * xc);
            }
            dy[2 + 3 * i] = dsx;
            dy[3 + 3 * i] = dsy;
            dy[4 + 3 * i] = dsz;
        }
        if (!with_cov_) return;

        // --- covariance: dC = A C + (A C)^T + D
        Eigen::Map<const RowMatrix> c(y.data() + nm, nm, nm);
        Eigen::Map<RowMatrix> dc(dy.data() + nm, nm, nm);
        RowMatrix& u = ws_->u;
        u.resize(nm, nm);

        u.row(0) = -kappa_ * c.row(0) + dcs_ * c.row(1);
        u.row(1) = -dcs_ * c.row(0) - kappa_ * c.row(1);
        if (coupled_) {
            for (std::size_t i = 0; i < m; ++i) {
                const Eigen::Index ix = 2 + 3 * static_cast<Eigen::Index>(i);
                const double gc = gcol_[i] / std::sqrt(2.0);
                u.row(0) -= gc * c.row(ix + 1);
                u.row(1) -= gc * c.row(ix);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            const Eigen::Index ix = 2 + 3 * static_cast<Eigen::Index>(i);
            const double d = grid_->delta[i];
            u.row(ix) = -gperp_ * c.row(ix) - d * c.row(ix + 1);
            u.row(ix + 1) = d * c.row(ix) - gperp_ * c.row(ix + 1);
            if (coupled_) {
                const double sx = y[2 + 3 * i], sy = y[3 + 3 * i], sz = y[4 + 3 * i];
                const double gz = std::sqrt(2.0) * gcol_[i] * sz;
                u.row(ix) -= (sq2g * pc) * c.row(ix + 2) + gz * c.row(1);
                u.row(ix + 1) -= (sq2g * xc) * c.row(ix + 2) + gz * c.row(0);
                u.row(ix + 2) = (sq2g * pc) * c.row(ix) + (sq2g * xc) * c.row(ix + 1) +
                                (std::sqrt(2.0) * gcol_[i]) * (sy * c.row(0) + sx * c.row(1));
            } else {
                u.row(ix + 2).setZero();
            }
        }
        dc = u + u.transpose();
        dc(0, 0) += kappa_;  // vacuum input noise of the leaky cavity
        dc(1, 1) += kappa_;
        if (gperp_ > 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                const Eigen::Index ix = 2 + 3 * static_cast<Eigen::Index>(i);
                dc(ix, ix) += 2.0 * gperp_;
                dc(ix + 1, ix + 1) += 2.0 * gperp_;
            }
        }
    }

private:
    const FrequencyGrid* grid_;
    bool with_cov_;
    double kappa_, dcs_;
    bool coupled_;
    double gperp_, g_;
    std::vector<double> gcol_, gpop_;
    std::shared_ptr<const SechPulse> presc_;
    std::function<Complex(double)> beta_;
    std::shared_ptr<MomentWorkspace> ws_;
};

/// lambda_min >= -floor * trace, tested through a shifted Cholesky factorization.
inline bool covariance_psd_ok(const RowMatrix& c, double floor_rel) {
    const double shift = floor_rel * std::max(c.trace(), 1.0);
    Eigen::MatrixXd shifted = c;
    shifted.diagonal().array() += shift;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Evolve means (and covariance when present) through one segment. The
/// sampler, when given, fires at multiples of sample_dt and at the segment
/// end. Covariance positivity is checked at sample times.
inline SystemState evolve_moments(const SystemState& state, const CavitySegment& segment,
                                  const FrequencyGrid& grid, const PhysicalParams& params,
                                  const MomentOptions& options = {},
                                  const MomentSampler& sampler = {},
                                  std::function<Complex(double)> beta = {}) {
    const std::size_t m = grid.size();
    if (state.n_classes() != m)
        throw ConfigError("evolve_moments: state and grid class counts differ");
    const bool with_cov = state.has_cov();
    const Eigen::Index nm = static_cast<Eigen::Index>(2 + 3 * m);

    std::shared_ptr<const SechPulse> presc;
    if (segment.drive && segment.drive->mode == DriveSpec::Mode::PrescribedIntracavity)
        presc = std::make_shared<SechPulse>(*segment.drive, params);

    Vector y0(with_cov ? nm + nm * nm : nm);
    y0.head(nm) = state.mean;
    if (presc) {
        const Complex a0 = presc->amplitude(state.t);
        y0[0] = std::sqrt(2.0) * a0.real();
        y0[1] = std::sqrt(2.0) * a0.imag();
    }
    if (with_cov) Eigen::Map<RowMatrix>(y0.data() + nm, nm, nm) = state.cov;

    detail::MomentRhs rhs(segment, grid, params, with_cov, presc, std::move(beta));

    auto materialize = [&](double t, const Vector& y) {
        SystemState st;
        st.t = t;
        st.mean = y.head(nm);
        if (with_cov) {
            st.cov = Eigen::Map<const RowMatrix>(y.data() + nm, nm, nm);
            st.cov = 0.5 * (st.cov + RowMatrix(st.cov.transpose()));  // enforce exact symmetry
            if (options.check_psd && !detail::covariance_psd_ok(st.cov, options.psd_floor))
                throw NumericalError("evolve_moments: covariance lost positivity at t=" +
                                     std::to_string(t));
        }
        return st;
    };

    Dopri5 solver(rhs, state.t, y0, options.ode);
    const double t_end = state.t + segment.duration;
    double last_sampled = -kInfinity;
    if (sampler && options.sample_dt > 0.0) {
        double next = state.t + options.sample_dt;
        Vector buf;
        solver.integrate_to(t_end, [&](const Dopri5& s) {
            while (next <= s.t() + 1e-14) {
                s.eval_dense(std::min(next, s.t()), buf);
                sampler(materialize(next, buf));
                last_sampled = next;
                next += options.sample_dt;
            }
        });
    } else {
        solver.integrate_to(t_end);
    }

    SystemState out = materialize(t_end, solver.y());
    if (sampler && last_sampled < t_end - 1e-12 * std::max(1.0, t_end)) sampler(out);
    return out;
}

}  // namespace spinmem
