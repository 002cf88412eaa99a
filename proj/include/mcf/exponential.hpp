#pragma once

#include <Eigen/Core>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"

namespace mcf {

// Expected exponential loss (1/N) sum_n prod_d E[exp(-y_n w_d x~_nd)],
// evaluated per example in log space. Returns +inf past the Laplace pole or
// on per-example overflow; fills `grad` when non-null.
double exp_loss(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm, const CorruptionSpec& spec,
                const Eigen::VectorXd& w, Eigen::VectorXd* grad = nullptr);

// Multi-class variant with a D x K weight matrix and simplex label vectors
// y in {1, -1/(K-1)}^K; structurally identical with t_nd = -y_n^T W_d.
double exp_loss_multiclass(const SparseExampleSet& set, const CorruptionSpec& spec, const Eigen::MatrixXd& weights,
                           Eigen::MatrixXd* grad = nullptr);

}  // namespace mcf
