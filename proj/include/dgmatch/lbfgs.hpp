#ifndef DGMATCH_LBFGS_HPP
#define DGMATCH_LBFGS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dgmatch {

/// Limited-memory BFGS with Armijo backtracking.
///
/// The curvature (strong Wolfe) condition is deliberately not enforced: the
/// Laplace objective is non-smooth and curvature conditions can fail near its
/// kinks. Pairs with non-positive curvature are simply skipped, which keeps
/// the two-loop recursion well-defined under plain backtracking.
struct LbfgsOptions {
    int max_iterations = 500;
    double grad_tolerance = 1e-8;   // sup-norm of the gradient
    double step_tolerance = 1e-12;  // relative objective decrease
    int history_size = 10;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    double initial_step = 1.0;
    double min_step = 1e-20;
};

struct LbfgsReport {
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace detail

/// Minimize fg over x in place. fg(x, grad) must write the gradient into
/// `grad` (same size as x) and return the objective value.
///
/// Accepted steps always satisfy the Armijo decrease test, so the objective
/// sequence is strictly decreasing. Convergence means either the gradient
/// sup-norm fell below grad_tolerance or the relative objective decrease
/// fell to step_tolerance (a failed line search counts as zero decrease).
/// `observer(iteration, objective)` is called after every accepted step.
template <typename Objective, typename Observer>
LbfgsReport lbfgs_minimize(std::vector<double>& x, Objective&& fg, const LbfgsOptions& opt,
                           Observer&& observer) {
    const std::size_t n = x.size();
    const std::size_t hist = static_cast<std::size_t>(std::max(opt.history_size, 1));

    std::vector<double> grad(n), grad_new(n), direction(n), x_trial(n);
    std::vector<double> s_new(n), y_new(n);
    std::vector<std::vector<double>> s_hist(hist, std::vector<double>(n));
    std::vector<std::vector<double>> y_hist(hist, std::vector<double>(n));
    std::vector<double> rho(hist), alpha(hist);
    std::size_t stored = 0, head = 0; // ring buffer of (s, y) pairs

    double f = fg(x, grad);
    LbfgsReport report{f, false, 0};

    if (detail::sup_norm(grad) <= opt.grad_tolerance) {
        report.converged = true;
        return report;
    }

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        // Two-loop recursion: direction = -H * grad.
        for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
        if (stored > 0) {
            for (std::size_t c = 0; c < stored; ++c) {
                const std::size_t idx = (head + stored - 1 - c) % hist;
                alpha[idx] = rho[idx] * detail::dot(s_hist[idx], direction);
                for (std::size_t i = 0; i < n; ++i) direction[i] -= alpha[idx] * y_hist[idx][i];
            }
            const std::size_t last = (head + stored - 1) % hist;
            const double gamma = 1.0 / (rho[last] * detail::dot(y_hist[last], y_hist[last]));
            for (std::size_t i = 0; i < n; ++i) direction[i] *= gamma;
            for (std::size_t c = 0; c < stored; ++c) {
                const std::size_t idx = (head + c) % hist;
                const double beta = rho[idx] * detail::dot(y_hist[idx], direction);
                for (std::size_t i = 0; i < n; ++i) direction[i] += (alpha[idx] - beta) * s_hist[idx][i];
            }
        } else {
            // First step: normalized steepest descent. Keeps the initial step
            // length independent of the objective's scale.
            const double gnorm = std::sqrt(detail::dot(grad, grad));
            for (std::size_t i = 0; i < n; ++i) direction[i] /= gnorm;
        }

        double dir_deriv = detail::dot(grad, direction);
        if (!(dir_deriv < 0.0)) {
            // Not a descent direction; drop the memory and restart from
            // normalized steepest descent.
            stored = 0;
            head = 0;
            const double gnorm = std::sqrt(detail::dot(grad, grad));
            if (gnorm == 0.0) {
                report.converged = true;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i] / gnorm;
            dir_deriv = detail::dot(grad, direction);
        }

        // Backtracking Armijo line search.
        double step = opt.initial_step;
        double f_trial = f;
        bool accepted = false;
        while (step >= opt.min_step) {
            for (std::size_t i = 0; i < n; ++i) x_trial[i] = x[i] + step * direction[i];
            f_trial = fg(x_trial, grad_new);
            if (std::isfinite(f_trial) && f_trial <= f + opt.armijo_c * step * dir_deriv) {
                accepted = true;
                break;
            }
            step *= opt.backtrack_factor;
        }
        if (!accepted) {
            // No acceptable step: the iterate is stalled, which satisfies the
            // zero-decrease form of the step criterion.
            report.converged = true;
            break;
        }

        // Store the curvature pair when it is usable.
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s_new[i] = x_trial[i] - x[i];
            y_new[i] = grad_new[i] - grad[i];
            sy += s_new[i] * y_new[i];
            ss += s_new[i] * s_new[i];
            yy += y_new[i] * y_new[i];
        }
        if (sy > 1e-10 * std::sqrt(ss) * std::sqrt(yy)) {
            std::size_t slot;
            if (stored < hist) {
                slot = (head + stored) % hist;
                ++stored;
            } else {
                slot = head;
                head = (head + 1) % hist;
            }
            s_hist[slot].swap(s_new);
            y_hist[slot].swap(y_new);
            rho[slot] = 1.0 / sy;
        }

        const double decrease = f - f_trial;
        x.swap(x_trial);
        grad.swap(grad_new);
        f = f_trial;
        report.objective = f;
        report.iterations = iter + 1;
        observer(iter + 1, f);

        if (detail::sup_norm(grad) <= opt.grad_tolerance) {
            report.converged = true;
            break;
        }
        if (decrease / std::max(1.0, std::abs(f)) <= opt.step_tolerance) {
            report.converged = true;
            break;
        }
    }

    return report;
}

template <typename Objective>
LbfgsReport lbfgs_minimize(std::vector<double>& x, Objective&& fg, const LbfgsOptions& opt) {
    return lbfgs_minimize(x, std::forward<Objective>(fg), opt, [](int, double) {});
}

} // namespace dgmatch

#endif // DGMATCH_LBFGS_HPP
