#ifndef DGMATCH_PROCRUSTES_HPP
#define DGMATCH_PROCRUSTES_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgmatch/geometry.hpp"

namespace dgmatch {

/// Square root of the sum of squared entries; shape-independent.
inline double frobenius_norm(std::span<const double> matrix) {
    if (matrix.empty()) throw std::invalid_argument("frobenius_norm: empty matrix");
    double acc = 0.0;
    for (double v : matrix) acc += v * v;
    return std::sqrt(acc);
}

/// Result of aligning an estimate onto a reference configuration with the
/// best orthonormal map. `rotation` is K x K row-major and may include a
/// reflection: the constraint is R^T R = I only, per the evaluation metric.
struct AlignmentResult {
    int dim = 0;
    std::vector<double> rotation; // K*K, row-major
    double residual_fro = 0.0;    // ||R * Xhat_c - X_c||_F
    double opp_loss = 0.0;        // residual_fro / N
};

namespace detail {

/// SVD of a small dense square matrix by one-sided Jacobi: A = U * S * V^T.
/// Columns of U belonging to (near-)zero singular values are completed to an
/// orthonormal basis, so U is always orthonormal even for rank-deficient A.
/// Intended for K x K with tiny K; plenty accurate and dependency-free.
struct SmallSvd {
    int n = 0;
    std::vector<double> u;      // n*n row-major
    std::vector<double> v;      // n*n row-major
    std::vector<double> sigma;  // n
};

inline SmallSvd small_svd(std::span<const double> a_in, int n) {
    SmallSvd out;
    out.n = n;
    std::vector<double> a(a_in.begin(), a_in.end()); // working copy, columns get rotated
    out.v.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) out.v[static_cast<std::size_t>(i) * n + i] = 1.0;

    const auto col_dot = [&](const std::vector<double>& m, int p, int q) {
        double acc = 0.0;
        for (int r = 0; r < n; ++r)
            acc += m[static_cast<std::size_t>(r) * n + p] * m[static_cast<std::size_t>(r) * n + q];
        return acc;
    };
    const auto rotate_cols = [&](std::vector<double>& m, int p, int q, double c, double s) {
        for (int r = 0; r < n; ++r) {
            const double mp = m[static_cast<std::size_t>(r) * n + p];
            const double mq = m[static_cast<std::size_t>(r) * n + q];
            m[static_cast<std::size_t>(r) * n + p] = c * mp - s * mq;
            m[static_cast<std::size_t>(r) * n + q] = s * mp + c * mq;
        }
    };

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double app = col_dot(a, p, p);
                const double aqq = col_dot(a, q, q);
                const double apq = col_dot(a, p, q);
                off = std::max(off, std::abs(apq) / std::max(std::sqrt(app * aqq), 1e-300));
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq)) continue;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_cols(a, p, q, c, s);
                rotate_cols(out.v, p, q, c, s);
            }
        }
        if (off < 1e-14) break;
    }

    out.sigma.resize(static_cast<std::size_t>(n));
    out.u.assign(static_cast<std::size_t>(n) * n, 0.0);
    double max_sigma = 0.0;
    for (int j = 0; j < n; ++j) {
        out.sigma[static_cast<std::size_t>(j)] = std::sqrt(col_dot(a, j, j));
        max_sigma = std::max(max_sigma, out.sigma[static_cast<std::size_t>(j)]);
    }
    const double tiny = std::max(max_sigma, 1.0) * 1e-13;

    // Normalized columns where the singular value is meaningful; Gram-Schmidt
    // completion from coordinate axes otherwise (rank-deficient input). The
    // objective value is unchanged by the completion choice.
    std::vector<bool> filled(static_cast<std::size_t>(n), false);
    for (int j = 0; j < n; ++j) {
        if (out.sigma[static_cast<std::size_t>(j)] <= tiny) continue;
        const double inv = 1.0 / out.sigma[static_cast<std::size_t>(j)];
        for (int r = 0; r < n; ++r)
            out.u[static_cast<std::size_t>(r) * n + j] = a[static_cast<std::size_t>(r) * n + j] * inv;
        filled[static_cast<std::size_t>(j)] = true;
    }
    for (int j = 0; j < n; ++j) {
        if (filled[static_cast<std::size_t>(j)]) continue;
        double best_norm2 = -1.0;
        std::vector<double> best(static_cast<std::size_t>(n), 0.0);
        for (int axis = 0; axis < n; ++axis) {
            std::vector<double> cand(static_cast<std::size_t>(n), 0.0);
            cand[static_cast<std::size_t>(axis)] = 1.0;
            for (int k = 0; k < n; ++k) {
                if (!filled[static_cast<std::size_t>(k)]) continue;
                double dot = 0.0;
                for (int r = 0; r < n; ++r)
                    dot += cand[static_cast<std::size_t>(r)] * out.u[static_cast<std::size_t>(r) * n + k];
                for (int r = 0; r < n; ++r)
                    cand[static_cast<std::size_t>(r)] -= dot * out.u[static_cast<std::size_t>(r) * n + k];
            }
            double norm2 = 0.0;
            for (double c : cand) norm2 += c * c;
            if (norm2 > best_norm2) {
                best_norm2 = norm2;
                best = cand;
            }
        }
        const double inv = 1.0 / std::sqrt(best_norm2);
        for (int r = 0; r < n; ++r)
            out.u[static_cast<std::size_t>(r) * n + j] = best[static_cast<std::size_t>(r)] * inv;
        filled[static_cast<std::size_t>(j)] = true;
    }
    return out;
}

} // namespace detail

/// Solve the orthogonal Procrustes problem between an estimate and the
/// ground truth: both are centered, R = U V^T from the SVD of the
/// cross-covariance X_c Xhat_c^T, and the reported loss is
/// ||R Xhat_c - X_c||_F / N. No determinant correction is applied, so R may
/// reflect; mirror-image estimates score a loss of zero.
inline AlignmentResult opp_align(const PointSet& estimate, const PointSet& truth) {
    validate_point_set(estimate);
    validate_point_set(truth);
    if (estimate.dim != truth.dim || estimate.n_points() != truth.n_points())
        throw std::invalid_argument("opp_align: estimate and truth shapes differ");

    const int n = truth.n_points();
    const int k = truth.dim;
    const PointSet xc = center(truth);
    const PointSet xhatc = center(estimate);

    // Cross-covariance M = X_c * Xhat_c^T with points as columns:
    // M[k1][k2] = sum_n xc[n][k1] * xhatc[n][k2]
    std::vector<double> m(static_cast<std::size_t>(k) * k, 0.0);
    for (int p = 0; p < n; ++p)
        for (int k1 = 0; k1 < k; ++k1)
            for (int k2 = 0; k2 < k; ++k2)
                m[static_cast<std::size_t>(k1) * k + k2] += xc.at(p, k1) * xhatc.at(p, k2);

    const detail::SmallSvd svd = detail::small_svd(m, k);

    AlignmentResult result;
    result.dim = k;
    result.rotation.assign(static_cast<std::size_t>(k) * k, 0.0);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t)
                acc += svd.u[static_cast<std::size_t>(r) * k + t] *
                       svd.v[static_cast<std::size_t>(c) * k + t];
            result.rotation[static_cast<std::size_t>(r) * k + c] = acc;
        }

    double res2 = 0.0;
    for (int p = 0; p < n; ++p) {
        for (int r = 0; r < k; ++r) {
            double mapped = 0.0;
            for (int c = 0; c < k; ++c)
                mapped += result.rotation[static_cast<std::size_t>(r) * k + c] * xhatc.at(p, c);
            const double diff = mapped - xc.at(p, r);
            res2 += diff * diff;
        }
    }
    result.residual_fro = std::sqrt(res2);
    result.opp_loss = result.residual_fro / static_cast<double>(n);
    return result;
}

} // namespace dgmatch

#endif // DGMATCH_PROCRUSTES_HPP
