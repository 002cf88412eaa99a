#pragma once

#include <Eigen/Core>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"

namespace mcf {

struct QuadSolveResult {
    Eigen::MatrixXd weights;            // D x K (K = 1 for a single target column)
    Eigen::VectorXd hat_diag;           // H_nn = E[x~_n]^T A^{-1} E[x~_n]
    Eigen::MatrixXd train_predictions;  // N x K, E[x~_n]^T W
};

// E[x~_n] as a sparse row (means vanish at structural zeros for every kind).
SparseRow mean_row(const SparseExampleSet& set, const CorruptionSpec& spec, int n);

// The normal-equations matrix of the expected quadratic loss,
//   A = sum_n (E[x~_n] E[x~_n]^T + diag V[x~_n]) + N*l2*I  (bias unpenalized).
// Exposed so regularizer identities can be checked entry-wise.
Eigen::MatrixXd assemble_system(const SparseExampleSet& set, const CorruptionSpec& spec, double l2);

// (1/N) sum_n E[(w^T x~_n - y_n)^2] under the corruption model.
double expected_quadratic_loss(const SparseExampleSet& set, const Eigen::VectorXd& targets,
                               const CorruptionSpec& spec, const Eigen::VectorXd& w);

// Closed-form minimizer of the expected quadratic loss, one column of
// weights per column of targets, plus the hat diagonal and training
// predictions. Adds one round of jitter if the factorization fails; a second
// failure reports the index of the null direction.
QuadSolveResult solve_quadratic(const SparseExampleSet& set, const Eigen::MatrixXd& targets,
                                const CorruptionSpec& spec, double l2);

// Closed-form leave-one-out error (1/N) sum ((y_n - yhat_n)/(1 - H_nn))^2.
// Throws when some H_nn = 1 (example n interpolated exactly).
double leave_one_out(const QuadSolveResult& result, const Eigen::VectorXd& targets);

}  // namespace mcf
