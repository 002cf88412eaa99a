#include "mcf/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mcf/rng.hpp"

namespace mcf::optimize {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CurvaturePair {
    Eigen::VectorXd s, y;
    double rho;
};

Eigen::VectorXd lbfgs_direction(const std::deque<CurvaturePair>& pairs, const Eigen::VectorXd& grad) {
    Eigen::VectorXd q = -grad;
    if (pairs.empty()) return q;
    std::vector<double> alpha(pairs.size());
    for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
        alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
        q -= alpha[i] * pairs[i].y;
    }
    const auto& last = pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double beta = pairs[i].rho * pairs[i].y.dot(q);
        q += (alpha[i] - beta) * pairs[i].s;
    }
    return q;
}

// Strong Wolfe line search along `direction`; bracketing by step doubling,
// zoom by bisection. Trial values of +inf are treated as "step too long".
struct LineSearch {
    const Objective& objective;
    const Eigen::VectorXd& w;
    const Eigen::VectorXd& direction;
    double f0, dg0, c1, c2;
    int budget;
    int evals = 0;

    // Outputs of the last evaluation.
    Eigen::VectorXd w_trial, grad_trial;
    double f_trial = kInf;

    double eval(double a) {
        w_trial = w + a * direction;
        f_trial = objective(w_trial, &grad_trial);
        ++evals;
        return std::isfinite(f_trial) ? grad_trial.dot(direction) : kInf;
    }

    bool sufficient(double a, double f) const { return f <= f0 + c1 * a * dg0; }

    // Returns the accepted step, or 0 on failure. `fallback` reports a
    // sufficient-decrease step that failed only the curvature condition.
    double run(double& fallback) {
        double a_lo = 0.0, f_lo = f0;
        double a_prev = 0.0, f_prev = f0;
        double a = 1.0;
        double a_hi = 0.0;
        bool bracketed = false;

        while (evals < budget) {
            const double g = eval(a);
            if (!std::isfinite(f_trial) || !sufficient(a, f_trial) || (a_prev > 0.0 && f_trial >= f_prev)) {
                a_lo = a_prev;
                f_lo = f_prev;
                a_hi = a;
                bracketed = true;
                break;
            }
            if (std::abs(g) <= -c2 * dg0) return a;
            if (g >= 0.0) {
                a_lo = a;
                f_lo = f_trial;
                a_hi = a_prev;
                bracketed = true;
                break;
            }
            a_prev = a;
            f_prev = f_trial;
            a *= 2.0;
        }
        if (!bracketed) {
            fallback = a_prev;
            return 0.0;
        }

        while (evals < budget) {
            a = 0.5 * (a_lo + a_hi);
            const double g = eval(a);
            if (!std::isfinite(f_trial) || !sufficient(a, f_trial) || f_trial >= f_lo) {
                a_hi = a;
            } else {
                if (std::abs(g) <= -c2 * dg0) return a;
                if (g * (a_hi - a_lo) >= 0.0) a_hi = a_lo;
                a_lo = a;
                f_lo = f_trial;
            }
            if (std::abs(a_hi - a_lo) <= 1e-16 * std::max(1.0, std::abs(a_lo))) break;
        }
        fallback = a_lo;
        return 0.0;
    }
};

}  // namespace

MinimizeResult minimize(const Objective& objective, Eigen::VectorXd w0, const OptimConfig& config) {
    MinimizeResult result;
    Eigen::VectorXd w = std::move(w0);
    Eigen::VectorXd grad(w.size());
    double value = objective(w, &grad);
    result.n_evaluations = 1;
    if (!std::isfinite(value)) throw std::invalid_argument("objective is not finite at the starting point");

    std::deque<CurvaturePair> pairs;

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        const double grad_inf = grad.lpNorm<Eigen::Infinity>();
        if (grad_inf <= config.grad_tol) {
            result.converged_grad = true;
            break;
        }

        Eigen::VectorXd direction = lbfgs_direction(pairs, grad);
        double dg = direction.dot(grad);
        if (!(dg < 0.0)) {
            pairs.clear();
            direction = -grad;
            dg = -grad.squaredNorm();
        }

        LineSearch search{objective, w, direction, value, dg, config.c1, config.c2,
                          config.max_line_search_steps, 0, Eigen::VectorXd(w.size()),
                          Eigen::VectorXd(w.size()), kInf};
        double fallback = 0.0;
        double alpha = search.run(fallback);
        result.n_evaluations += search.evals;
        if (alpha == 0.0) {
            result.line_search_warning = true;
            if (fallback > 0.0) {
                alpha = fallback;
                search.eval(alpha);
                ++result.n_evaluations;
            }
            if (!(fallback > 0.0 && std::isfinite(search.f_trial) && search.f_trial < value)) break;
        }

        Eigen::VectorXd s = search.w_trial - w;
        Eigen::VectorXd y = search.grad_trial - grad;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (static_cast<int>(pairs.size()) > config.memory) pairs.pop_front();
        }

        const double prev = value;
        w.swap(search.w_trial);
        grad.swap(search.grad_trial);
        value = search.f_trial;
        result.trace.push_back({value, grad.lpNorm<Eigen::Infinity>(), alpha});
        if (config.trace_stream)
            *config.trace_stream << "iter " << iter << " value " << value << " grad_inf "
                                 << result.trace.back().grad_inf << " step " << alpha << '\n';

        if (result.line_search_warning) break;
        if (std::abs(prev - value) < config.value_tol * std::max(1.0, std::abs(prev))) {
            result.converged_value = true;
            break;
        }
        if (iter + 1 == config.max_iterations) result.hit_max_iterations = true;
    }
    if (result.trace.empty()) result.trace.push_back({value, grad.lpNorm<Eigen::Infinity>(), 0.0});

    result.w = std::move(w);
    result.value = value;
    return result;
}

double check_gradient(const Objective& objective, const Eigen::VectorXd& w, double h, std::uint64_t seed) {
    Eigen::VectorXd grad(w.size());
    objective(w, &grad);

    const int dim = static_cast<int>(w.size());
    std::vector<int> coords;
    if (dim <= 200) {
        coords.resize(dim);
        for (int d = 0; d < dim; ++d) coords[d] = d;
    } else {
        Rng rng(hash_seed(seed, 0x6772616463686bull));
        for (int i = 0; i < 50; ++i) coords.push_back(static_cast<int>(rng.uniform_int(dim)));
        std::sort(coords.begin(), coords.end());
        coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }

    // Three step sizes per coordinate: the rounding-noise floor of a central
    // difference is ~eps/h (favouring larger steps for small gradient
    // entries) while the truncation error is ~f''' h^2 (favouring smaller
    // steps under heavy curvature).
    double worst = 0.0;
    Eigen::VectorXd probe = w;
    for (int d : coords) {
        double best = std::numeric_limits<double>::infinity();
        for (double step : {0.1 * h, h, 10.0 * h}) {
            probe[d] = w[d] + step;
            const double fp = objective(probe, nullptr);
            probe[d] = w[d] - step;
            const double fm = objective(probe, nullptr);
            probe[d] = w[d];
            const double fd = (fp - fm) / (2.0 * step);
            best = std::min(best, std::abs(fd - grad[d]) / (std::abs(fd) + std::abs(grad[d]) + 1e-12));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace mcf::optimize
