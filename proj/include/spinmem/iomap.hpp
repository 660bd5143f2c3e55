#pragma once

// Generalized input-output characterization of the memory: the mean-value
// map (X_in, P_in) -> (-X_out, -P_out) factored as R(theta1) diag(G1, G2)
// R(-theta0), variances along the principal axes, the qubit fidelity and the
// gain-decay fit against dephasing.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "spinmem/moments.hpp"
#include "spinmem/params.hpp"

namespace spinmem {

struct GainMap {
    double theta0 = 0.0;
    double theta1 = 0.0;
    double g1 = 0.0;  // major-axis gain, g1 >= g2 >= 0
    double g2 = 0.0;
    double theta() const { return theta1 - theta0; }
};

struct IoPair {
    double x_in, p_in;
    double x_out, p_out;
};

/// Least-squares 2x2 fit of (X_in, P_in) -> (-X_out, -P_out), factored by SVD
/// with rotation factors and theta1 canonicalized into (-pi/2, pi/2].
inline GainMap fit_io_map(const std::vector<IoPair>& pairs) {
    Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
    for (const auto& p : pairs) {
        const Eigen::Vector2d in(p.x_in, p.p_in);
        const Eigen::Vector2d target(-p.x_out, -p.p_out);
        gram += in * in.transpose();
        cross += target * in.transpose();
    }
    const double scale = gram.trace();
    if (pairs.size() < 2 || scale <= 0.0 ||
        std::abs(gram.determinant()) < 1e-20 * scale * scale)
        throw NumericalError("fit_io_map: input set is rank deficient (need >= 2 directions)");
    const Eigen::Matrix2d m = cross * gram.inverse();

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Vector2d sv = svd.singularValues();
    if (m.determinant() < -1e-12 * sv(0) * sv(0))
        throw NumericalError("fit_io_map: orientation-reversing map cannot be factored into "
                             "rotations with nonnegative gains");
    // make both factors proper rotations; flipping both second columns leaves
    // the singular values untouched
    if (u.determinant() < 0.0 && v.determinant() < 0.0) {
        u.col(1) *= -1.0;
        v.col(1) *= -1.0;
    } else if (u.determinant() < 0.0 || v.determinant() < 0.0) {
        // det(m) ~ 0: the smaller gain vanishes, its axis sign is free
        (u.determinant() < 0.0 ? u : v).col(1) *= -1.0;
        sv(1) = 0.0;
    }

    GainMap out;
    out.g1 = sv(0);
    out.g2 = sv(1);
    out.theta1 = std::atan2(u(1, 0), u(0, 0));
    out.theta0 = std::atan2(v(1, 0), v(0, 0));
    // gauge: simultaneous pi-shifts of both angles leave the map invariant
    while (out.theta1 > 0.5 * std::numbers::pi) {
        out.theta1 -= std::numbers::pi;
        out.theta0 -= std::numbers::pi;
    }
    while (out.theta1 <= -0.5 * std::numbers::pi) {
        out.theta1 += std::numbers::pi;
        out.theta0 += std::numbers::pi;
    }
    while (out.theta0 > std::numbers::pi) out.theta0 -= 2.0 * std::numbers::pi;
    while (out.theta0 <= -std::numbers::pi) out.theta0 += 2.0 * std::numbers::pi;
    return out;
}

/// Reassemble the 2x2 matrix from a gain map (test/diagnostic helper).
inline Eigen::Matrix2d io_map_matrix(const GainMap& gm) {
    auto rot = [](double th) {
        Eigen::Matrix2d r;
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        return r;
    };
    return rot(gm.theta1) * Eigen::DiagonalMatrix<double, 2>(gm.g1, gm.g2) * rot(-gm.theta0);
}

/// Variance of X(theta) = X cos(theta) + P sin(theta) for a 2x2 symmetric
/// covariance block.
inline double variance_along(const Eigen::Matrix2d& cov, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return cov(0, 0) * c * c + cov(1, 1) * s * s + (cov(0, 1) + cov(1, 0)) * s * c;
}

/// Average fidelity for a qubit encoded in the {|0>, |1>} Fock states, given
/// the asymmetric gain map and the output variances along the map axes.
inline double qubit_fidelity(double g1, double g2, double sigma1_sq, double sigma2_sq) {
    if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0))
        throw NumericalError("qubit_fidelity: variances must be positive");
    const double a1 = sigma1_sq + 0.5, a2 = sigma2_sq + 0.5;
    double f = 3.0;
    f += 3.0 * (sigma1_sq * sigma2_sq - 0.25) / (a1 * a2);
    f += g1 / a1 + g2 / a2;
    f -= g1 * g1 * (sigma1_sq - 1.0) / (a1 * a1);
    f -= g2 * g2 * (sigma2_sq - 1.0) / (a2 * a2);
    f -= (g1 * g1 * (sigma2_sq - 0.5) + g2 * g2 * (sigma1_sq - 0.5)) / (2.0 * a1 * a2);
    return f / (6.0 * std::sqrt(a1 * a2));
}

inline double qubit_fidelity(const GainMap& gm, double sigma1_sq, double sigma2_sq) {
    return qubit_fidelity(gm.g1, gm.g2, sigma1_sq, sigma2_sq);
}

struct GainDecayFit {
    double g0 = 0.0;  // extrapolated gain at gamma_perp = 0
    double t0 = 0.0;  // shielded time: G = g0 exp(-gamma_perp (t_mem - t0))
};

/// Log-linear least squares of gain versus dephasing rate.
inline GainDecayFit fit_gain_decay(const std::vector<std::pair<double, double>>& points,
                                   double t_mem) {
    if (points.size() < 3) throw NumericalError("fit_gain_decay: need at least 3 points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [gamma, gain] : points) {
        if (!(gain > 0.0)) throw NumericalError("fit_gain_decay: gains must be positive");
        sx += gamma;
        sy += std::log(gain);
        sxx += gamma * gamma;
        sxy += gamma * std::log(gain);
    }
    const double n = static_cast<double>(points.size());
    const double den = n * sxx - sx * sx;
    if (den <= 0.0) throw NumericalError("fit_gain_decay: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / den;
    const double intercept = (sy - slope * sx) / n;
    return {std::exp(intercept), t_mem + slope};
}

struct ResnSample {
    double t;
    NoiseObservables noise;
};

struct RunResult {
    GainMap gain_map;
    double sigma1_sq = 0.5;
    double sigma2_sq = 0.5;
    double p_exc_end = 0.0;
    double f_q = 1.0;
    std::vector<ResnSample> resn_series;

    double sigma_sq() const { return 0.5 * (sigma1_sq + sigma2_sq); }
    double gain_avg() const { return 0.5 * (gain_map.g1 + gain_map.g2); }
    double ren() const { return 2.0 * sigma_sq() - 1.0; }
};

}  // namespace spinmem
