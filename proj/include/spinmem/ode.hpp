#pragma once

// Adaptive Dormand-Prince 5(4) integrator with dense output, after Hairer,
// Norsett & Wanner. The state is a flat Eigen vector; the right-hand side is
// any callable f(t, y, dy). Dense output is a fourth-order interpolant over
// the last accepted step, used for sampling and zero-crossing searches.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "spinmem/params.hpp"

namespace spinmem {

using Vector = Eigen::VectorXd;

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 -> automatic
    double h_max = kInfinity;
    long max_steps = 200'000'000L;
};

namespace dopri5 {
// nodes
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
// stage coefficients
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
// embedded error coefficients (b5 - b4)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dopri5

class Dopri5 {
public:
    using Rhs = std::function<void(double, const Vector&, Vector&)>;
    /// Called after every accepted step with the integrator itself; dense
    /// evaluation over [t_prev(), t()] is valid inside the callback.
    using Observer = std::function<void(const Dopri5&)>;

    Dopri5(Rhs rhs, double t0, Vector y0, OdeOptions opts = {})
        : rhs_(std::move(rhs)), opts_(opts), t_(t0), t_prev_(t0), y_(std::move(y0)) {
        const auto n = y_.size();
        y_prev_ = y_;
        for (auto& k : k_) k.resize(n);
        ytmp_.resize(n);
        rhs_(t_, y_, k_[0]);
        ++n_evals_;
    }

    double t() const { return t_; }
    double t_prev() const { return t_prev_; }
    const Vector& y() const { return y_; }
    Vector& y_mutable() { return y_; }
    long n_steps() const { return n_steps_; }
    long n_evals() const { return n_evals_; }

    /// Integrate forward to t_end; the observer (if any) fires per accepted step.
    void integrate_to(double t_end, const Observer& obs = nullptr) {
        using namespace dopri5;
        if (t_end <= t_) return;
        double h = opts_.h_init > 0.0 ? opts_.h_init : initial_step(t_end);
        bool rejected = false;
        while (t_ < t_end) {
            if (++n_attempts_ > opts_.max_steps)
                throw NumericalError("Dopri5: step budget exhausted");
            h = std::min({h, opts_.h_max, t_end - t_});
            if (!(h > std::abs(t_) * 1e-15 + 1e-300))
                throw NumericalError("Dopri5: step size underflow at t=" + std::to_string(t_));

            const Vector& k1 = k_[0];
            ytmp_ = y_ + h * (a21 * k1);
            rhs_(t_ + c2 * h, ytmp_, k_[1]);
            ytmp_ = y_ + h * (a31 * k1 + a32 * k_[1]);
            rhs_(t_ + c3 * h, ytmp_, k_[2]);
            ytmp_ = y_ + h * (a41 * k1 + a42 * k_[1] + a43 * k_[2]);
            rhs_(t_ + c4 * h, ytmp_, k_[3]);
            ytmp_ = y_ + h * (a51 * k1 + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]);
            rhs_(t_ + c5 * h, ytmp_, k_[4]);
            ytmp_ = y_ + h * (a61 * k1 + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]);
            rhs_(t_ + h, ytmp_, k_[5]);
            ytmp_ = y_ + h * (a71 * k1 + a73 * k_[2] + a74 * k_[3] + a75 * k_[4] + a76 * k_[5]);
            rhs_(t_ + h, ytmp_, k_[6]);  // FSAL stage = new k1 on acceptance
            n_evals_ += 6;

            // weighted RMS error norm
            double err_sq = 0.0;
            const auto n = y_.size();
            for (Eigen::Index i = 0; i < n; ++i) {
                const double e = h * (e1 * k1[i] + e3 * k_[2][i] + e4 * k_[3][i] +
                                      e5 * k_[4][i] + e6 * k_[5][i] + e7 * k_[6][i]);
                const double sc =
                    opts_.atol + opts_.rtol * std::max(std::abs(y_[i]), std::abs(ytmp_[i]));
                err_sq += (e / sc) * (e / sc);
            }
            const double err = std::sqrt(err_sq / static_cast<double>(n));

            if (err <= 1.0 || !std::isfinite(err)) {
                if (!std::isfinite(err) || !ytmp_.allFinite())
                    throw NumericalError("Dopri5: non-finite state at t=" + std::to_string(t_));
                t_prev_ = t_;
                y_prev_.swap(y_);
                t_ += h;
                y_.swap(ytmp_);
                k_[0].swap(k_[6]);  // FSAL: k7 at (t, y) becomes the next k1
                ++n_steps_;
                last_h_ = h;
                dense_fresh_ = false;
                if (obs) obs(*this);
                const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
                h *= std::min(rejected ? 1.0 : 10.0, std::max(0.2, fac));
                rejected = false;
            } else {
                h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
                rejected = true;
            }
        }
    }

    /// Dense evaluation at t inside the last accepted step [t_prev, t]. The
    /// interpolant is built lazily on first use after a step.
    void eval_dense(double t, Vector& out) const {
        if (!dense_fresh_) prepare_dense();
        const double th = (t - t_prev_) / last_h_;
        const double th1 = 1.0 - th;
        out = rcont1_ + th * (rcont2_ + th1 * (rcont3_ + th * (rcont4_ + th1 * rcont5_)));
    }

    Vector eval_dense(double t) const {
        Vector out(y_.size());
        eval_dense(t, out);
        return out;
    }

private:
    double initial_step(double t_end) const {
        // crude but safe: base the guess on the first derivative scale
        const double d0 = y_.norm();
        const double d1 = k_[0].norm();
        double h = (d1 > 1e-10) ? 0.01 * std::max(d0, 1.0) / d1 : 1e-6;
        return std::min(h, (t_end - t_) / 10.0);
    }

    // Called after the FSAL swap: k_[6] holds the old k1 and k_[0] the old k7.
    void prepare_dense() const {
        using namespace dopri5;
        const double h = last_h_;
        rcont1_ = y_prev_;
        rcont2_ = y_ - y_prev_;
        rcont3_ = h * k_[6] - rcont2_;
        rcont4_ = rcont2_ - h * k_[0] - rcont3_;
        rcont5_ = h * (d1 * k_[6] + d3 * k_[2] + d4 * k_[3] + d5 * k_[4] + d6 * k_[5] +
                       d7 * k_[0]);
        dense_fresh_ = true;
    }

    Rhs rhs_;
    OdeOptions opts_;
    double t_, t_prev_, last_h_ = 0.0;
    Vector y_, y_prev_, ytmp_;
    Vector k_[7];
    mutable Vector rcont1_, rcont2_, rcont3_, rcont4_, rcont5_;
    mutable bool dense_fresh_ = false;
    long n_steps_ = 0, n_attempts_ = 0, n_evals_ = 0;
};

/// First root of the scalar functional g(t, y(t)) in (t0, t_end], located on
/// the dense output by bisection refined with secant steps. Returns NaN when
/// no sign change occurs.
inline double find_zero_crossing(Dopri5::Rhs rhs, double t0, const Vector& y0, double t_end,
                                 const std::function<double(double, const Vector&)>& g,
                                 OdeOptions opts = {}) {
    Dopri5 solver(std::move(rhs), t0, y0, opts);
    double root = std::numeric_limits<double>::quiet_NaN();
    double g_prev = g(t0, y0);
    solver.integrate_to(t_end, [&](const Dopri5& s) {
        if (std::isfinite(root)) return;
        const double g_now = g(s.t(), s.y());
        if (g_prev == 0.0) {
            root = s.t_prev();
        } else if (g_prev * g_now <= 0.0 && g_now != g_prev) {
            double lo = s.t_prev(), hi = s.t();
            double glo = g_prev;
            Vector tmp(s.y().size());
            for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
                const double mid = 0.5 * (lo + hi);
                s.eval_dense(mid, tmp);
                const double gm = g(mid, tmp);
                if (glo * gm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            root = 0.5 * (lo + hi);
        }
        g_prev = g_now;
    });
    return root;
}

}  // namespace spinmem
