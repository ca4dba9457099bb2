#ifndef DGMATCH_ESTIMATOR_HPP
#define DGMATCH_ESTIMATOR_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgmatch/lbfgs.hpp"
#include "dgmatch/likelihood.hpp"
#include "dgmatch/rng.hpp"

namespace dgmatch {

/// Multi-restart optimizer settings. init_scale multiplies the structure
/// scale implied by the data (the mean of all measurement values) to give
/// the standard deviation of the random initialization.
struct OptimizerSettings {
    int max_iterations = 500;
    double grad_tolerance = 1e-8;
    double step_tolerance = 1e-12;
    int history_size = 10;
    int restarts = 5;
    double init_scale = 1.0;
};

inline void validate_optimizer_settings(const OptimizerSettings& s) {
    if (s.max_iterations < 1 || s.history_size < 1 || s.restarts < 1)
        throw std::invalid_argument("optimizer settings: counts must be >= 1");
    if (!(s.grad_tolerance > 0.0) || !(s.step_tolerance > 0.0) || !(s.init_scale > 0.0))
        throw std::invalid_argument("optimizer settings: tolerances and init_scale must be > 0");
}

struct EstimateResult {
    PointSet estimate;
    double final_nll = 0.0;
    bool converged = false;
    int iterations_used = 0;
    int restart_index = 0;
};

struct degenerate_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Random starting configuration: every coordinate iid normal with standard
/// deviation `scale`.
inline PointSet random_init(int n_points, int dim, double scale, Rng& rng) {
    if (n_points < 2 || dim < 1) throw std::invalid_argument("random_init: bad shape");
    if (!(scale > 0.0)) throw std::invalid_argument("random_init: scale must be > 0");
    PointSet ps;
    ps.dim = dim;
    ps.coords.resize(static_cast<std::size_t>(n_points) * dim);
    for (double& c : ps.coords) c = rng.normal(0.0, scale);
    return ps;
}

namespace detail {

/// Structure scale used to size random initializations when the truth is
/// unknown: the mean of all measurement values, falling back to the mean of
/// absolute values when noise drives the mean non-positive.
inline double init_sigma_proxy(const MeasurementSet& meas) {
    double mean = 0.0, mean_abs = 0.0;
    for (double v : meas.values) {
        mean += v;
        mean_abs += std::abs(v);
    }
    mean /= static_cast<double>(meas.values.size());
    mean_abs /= static_cast<double>(meas.values.size());
    if (mean > 0.0) return mean;
    if (mean_abs > 0.0) return mean_abs;
    return 1.0;
}

} // namespace detail

/// Maximum-likelihood estimation of the point configuration: `restarts`
/// independent L-BFGS runs from random initializations, keeping the lowest
/// final NLL (ties go to the earliest restart). The optimizer itself draws
/// nothing from `rng`, so two calls with equally seeded streams see
/// identical initializations regardless of the likelihood being optimized.
template <typename Observer>
EstimateResult estimate(const MeasurementSet& meas, const LikelihoodSpec& spec, int n_points,
                        int dim, const OptimizerSettings& settings, Rng& rng,
                        Observer&& observer) {
    validate_likelihood_spec(spec);
    validate_measurement_set(meas);
    validate_optimizer_settings(settings);
    if (n_points != meas.n_points)
        throw std::invalid_argument("estimate: n_points does not match measurements");
    if (dim < 1) throw std::invalid_argument("estimate: dim must be >= 1");

    const double init_sigma = settings.init_scale * detail::init_sigma_proxy(meas);

    LbfgsOptions opt;
    opt.max_iterations = settings.max_iterations;
    opt.grad_tolerance = settings.grad_tolerance;
    opt.step_tolerance = settings.step_tolerance;
    opt.history_size = settings.history_size;

    const auto objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
        return detail::nll_core(x, n_points, dim, meas, spec.model, grad.data());
    };

    EstimateResult best;
    bool have_best = false;

    for (int restart = 0; restart < settings.restarts; ++restart) {
        PointSet start;
        double f0 = 0.0;
        int redraws = 0;
        for (;; ++redraws) {
            if (redraws > 100)
                throw degenerate_input_error(
                    "estimate: objective non-finite at initialization after 100 redraws");
            start = random_init(n_points, dim, init_sigma, rng);
            f0 = detail::nll_core(start.coords, n_points, dim, meas, spec.model, nullptr);
            if (std::isfinite(f0)) break;
        }

        std::vector<double> x = std::move(start.coords);
        const LbfgsReport report = lbfgs_minimize(
            x, objective, opt, [&](int iter, double f) { observer(restart, iter, f); });

        if (!have_best || report.objective < best.final_nll) {
            best.estimate.id = meas.structure_id;
            best.estimate.dim = dim;
            best.estimate.coords = std::move(x);
            best.final_nll = report.objective;
            best.converged = report.converged;
            best.iterations_used = report.iterations;
            best.restart_index = restart;
            have_best = true;
        }
    }
    return best;
}

inline EstimateResult estimate(const MeasurementSet& meas, const LikelihoodSpec& spec,
                               int n_points, int dim, const OptimizerSettings& settings,
                               Rng& rng) {
    return estimate(meas, spec, n_points, dim, settings, rng, [](int, int, double) {});
}

} // namespace dgmatch

#endif // DGMATCH_ESTIMATOR_HPP
