#ifndef DGMATCH_LIKELIHOOD_HPP
#define DGMATCH_LIKELIHOOD_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgmatch/geometry.hpp"
#include "dgmatch/noise.hpp"

namespace dgmatch {

/// M noisy length measurements for every edge of the complete graph on
/// n_points points. Values are stored edge-major in the canonical
/// lexicographic edge order: values[e * m_per_edge + m].
struct MeasurementSet {
    std::string structure_id;
    int n_points = 0;
    int m_per_edge = 0;
    std::vector<double> values;

    int edge_count() const { return dgmatch::edge_count(n_points); }

    double value(int edge, int m) const {
        return values[static_cast<std::size_t>(edge) * m_per_edge + m];
    }

    std::span<const double> edge_values(int edge) const {
        return {values.data() + static_cast<std::size_t>(edge) * m_per_edge,
                static_cast<std::size_t>(m_per_edge)};
    }
};

inline void validate_measurement_set(const MeasurementSet& meas) {
    if (meas.n_points < 2) throw std::invalid_argument("measurements: need at least 2 points");
    if (meas.m_per_edge < 1) throw std::invalid_argument("measurements: m_per_edge must be >= 1");
    const std::size_t expected =
        static_cast<std::size_t>(meas.edge_count()) * static_cast<std::size_t>(meas.m_per_edge);
    if (meas.values.size() != expected)
        throw std::invalid_argument("measurements: value count does not match complete edge set");
    for (double v : meas.values)
        if (!std::isfinite(v)) throw std::invalid_argument("measurements: non-finite value");
}

/// Which marginal density enters the likelihood product. The same model is
/// shared by every edge (the equal-variance protocol); `family` must agree
/// with the model's actual alternative.
struct LikelihoodSpec {
    NoiseFamily family = NoiseFamily::gaussian;
    NoiseModel model = Gaussian{1.0};
};

inline LikelihoodSpec likelihood_spec(const NoiseModel& model) {
    return {family_of(model), model};
}

inline void validate_likelihood_spec(const LikelihoodSpec& spec) {
    if (spec.family != family_of(spec.model))
        throw std::invalid_argument("likelihood spec: family tag does not match the model");
}

namespace detail {

inline void check_candidate(const PointSet& candidate, const MeasurementSet& meas) {
    validate_point_set(candidate);
    validate_measurement_set(meas);
    if (candidate.n_points() != meas.n_points)
        throw std::invalid_argument("likelihood: candidate point count does not match measurements");
}

/// Negative log-likelihood over flat coordinates, optionally with its
/// gradient accumulated into grad (size n*k, zeroed here). This is the
/// optimizer's hot path: the family dispatch and the constant part of the
/// log-density are hoisted out of the per-measurement loop.
inline double nll_core(std::span<const double> coords, int n_points, int dim,
                       const MeasurementSet& meas, const NoiseModel& model,
                       double* grad) {
    const int m_per_edge = meas.m_per_edge;
    const int n_edges = meas.edge_count();
    const std::size_t n_values = static_cast<std::size_t>(n_edges) * m_per_edge;

    if (grad) std::fill(grad, grad + coords.size(), 0.0);

    // Per-family accumulation: `edge_term(edge, d)` returns the data-dependent
    // part of the edge's NLL and the derivative of the edge NLL w.r.t. d.
    double total = 0.0;

    const auto accumulate = [&](auto per_value_nll, auto per_value_ddd) {
        int edge = 0;
        for (int i = 0; i < n_points - 1; ++i) {
            for (int j = i + 1; j < n_points; ++j, ++edge) {
                double d2 = 0.0;
                for (int k = 0; k < dim; ++k) {
                    const double delta = coords[static_cast<std::size_t>(i) * dim + k] -
                                         coords[static_cast<std::size_t>(j) * dim + k];
                    d2 += delta * delta;
                }
                const double d = std::sqrt(d2);
                const std::span<const double> ys = meas.edge_values(edge);

                double dnll_dd = 0.0;
                for (double y : ys) {
                    total += per_value_nll(y, d);
                    if (grad) dnll_dd -= per_value_ddd(y, d);
                }
                if (grad && d > 0.0) {
                    for (int k = 0; k < dim; ++k) {
                        const double delta = coords[static_cast<std::size_t>(i) * dim + k] -
                                             coords[static_cast<std::size_t>(j) * dim + k];
                        const double g = dnll_dd * delta / d;
                        grad[static_cast<std::size_t>(i) * dim + k] += g;
                        grad[static_cast<std::size_t>(j) * dim + k] -= g;
                    }
                }
                // d == 0: the direction (x_i - x_j)/d is replaced by the zero
                // vector, so this edge contributes nothing to the gradient.
            }
        }
    };

    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                const double inv_theta = 1.0 / m.theta;
                const double log_norm = 0.5 * (detail::kLogTwoPi + std::log(m.theta));
                total += log_norm * static_cast<double>(n_values);
                accumulate(
                    [&](double y, double d) {
                        const double r = y - d;
                        return 0.5 * r * r * inv_theta;
                    },
                    [&](double y, double d) { return (y - d) * inv_theta; });
            } else if constexpr (std::is_same_v<T, Laplace>) {
                const double inv_theta = 1.0 / m.theta;
                total += std::log(2.0 * m.theta) * static_cast<double>(n_values);
                accumulate(
                    [&](double y, double d) { return std::abs(y - d) * inv_theta; },
                    [&](double y, double d) {
                        const double r = y - d;
                        if (r > 0.0) return inv_theta;
                        if (r < 0.0) return -inv_theta;
                        return 0.0;
                    });
            } else {
                const double nu = static_cast<double>(m.nu);
                const double inv_b = 1.0 / m.b;
                const double log_norm = std::log(m.b) + 0.5 * (std::log(nu) + detail::kLogPi) +
                                        std::lgamma(nu / 2.0) - std::lgamma((nu + 1.0) / 2.0);
                total += log_norm * static_cast<double>(n_values);
                accumulate(
                    [&](double y, double d) {
                        const double w = (y - d) * inv_b;
                        return 0.5 * (nu + 1.0) * std::log1p(w * w / nu);
                    },
                    [&](double y, double d) {
                        const double w = (y - d) * inv_b;
                        return (nu + 1.0) * inv_b * w / (nu + w * w);
                    });
            }
        },
        model);

    return total;
}

} // namespace detail

/// Negative log-likelihood of the factorized measurement model at a
/// candidate configuration: -sum over edges and measurements of the
/// log-density of y given the candidate's edge length.
inline double nll(const PointSet& candidate, const MeasurementSet& meas,
                  const LikelihoodSpec& spec) {
    validate_likelihood_spec(spec);
    detail::check_candidate(candidate, meas);
    return detail::nll_core(candidate.coords, candidate.n_points(), candidate.dim, meas,
                            spec.model, nullptr);
}

/// Analytic gradient of nll with respect to the flattened coordinates.
/// Chain rule through d_ij = ||x_i - x_j||; coincident points use the zero
/// direction so the gradient never produces NaNs.
inline std::vector<double> nll_grad(const PointSet& candidate, const MeasurementSet& meas,
                                    const LikelihoodSpec& spec) {
    validate_likelihood_spec(spec);
    detail::check_candidate(candidate, meas);
    std::vector<double> grad(candidate.coords.size(), 0.0);
    detail::nll_core(candidate.coords, candidate.n_points(), candidate.dim, meas, spec.model,
                     grad.data());
    return grad;
}

/// Sum of squared errors between measurements and candidate edge lengths.
/// Minimizing this is the classical least-squares route; for Gaussian noise
/// with variance theta, nll = sse/(2*theta) + constant.
inline double sse(const PointSet& candidate, const MeasurementSet& meas) {
    detail::check_candidate(candidate, meas);
    const int n = candidate.n_points();
    double total = 0.0;
    int edge = 0;
    for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 1; j < n; ++j, ++edge) {
            const double d = point_distance(candidate, i, j);
            for (double y : meas.edge_values(edge)) {
                const double r = y - d;
                total += r * r;
            }
        }
    }
    return total;
}

/// Gradient of sse over flat coordinates; companion to sse for the
/// least-squares equivalence checks.
inline std::vector<double> sse_grad(const PointSet& candidate, const MeasurementSet& meas) {
    detail::check_candidate(candidate, meas);
    const int n = candidate.n_points();
    const int dim = candidate.dim;
    std::vector<double> grad(candidate.coords.size(), 0.0);
    int edge = 0;
    for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 1; j < n; ++j, ++edge) {
            const double d = point_distance(candidate, i, j);
            if (d <= 0.0) continue;
            double dsse_dd = 0.0;
            for (double y : meas.edge_values(edge)) dsse_dd += -2.0 * (y - d);
            for (int k = 0; k < dim; ++k) {
                const double delta = candidate.at(i, k) - candidate.at(j, k);
                const double g = dsse_dd * delta / d;
                grad[static_cast<std::size_t>(i) * dim + k] += g;
                grad[static_cast<std::size_t>(j) * dim + k] -= g;
            }
        }
    }
    return grad;
}

} // namespace dgmatch

#endif // DGMATCH_LIKELIHOOD_HPP
