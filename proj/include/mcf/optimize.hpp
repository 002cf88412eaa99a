#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace mcf::optimize {

// Returns the value at w; fills *grad when non-null. +inf marks a rejected
// region (e.g. the Laplace MGF pole); the line search backs off from it.
using Objective = std::function<double(const Eigen::VectorXd& w, Eigen::VectorXd* grad)>;

struct OptimConfig {
    int max_iterations = 1000;
    double grad_tol = 1e-6;       // inf-norm of the gradient
    double value_tol = 1e-12;     // relative objective change
    int memory = 10;              // curvature pairs kept
    double c1 = 1e-4;             // sufficient decrease
    double c2 = 0.9;              // curvature condition
    int max_line_search_steps = 40;
    std::ostream* trace_stream = nullptr;
};

struct IterStat {
    double value;
    double grad_inf;
    double step;
};

struct MinimizeResult {
    Eigen::VectorXd w;
    double value = 0.0;
    std::vector<IterStat> trace;
    bool converged_grad = false;
    bool converged_value = false;
    bool hit_max_iterations = false;
    bool line_search_warning = false;
    int n_evaluations = 0;
};

// Limited-memory BFGS (two-loop recursion, strong Wolfe line search).
// Throws if the objective is not finite at w0.
MinimizeResult minimize(const Objective& objective, Eigen::VectorXd w0, const OptimConfig& config = {});

// Max relative error between the analytic gradient and central differences.
// All coordinates are probed when dim <= 200, otherwise 50 seeded random ones.
double check_gradient(const Objective& objective, const Eigen::VectorXd& w, double h = 1e-6,
                      std::uint64_t seed = 0);

}  // namespace mcf::optimize
