#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"

namespace mcf {

// A(a) = log(exp(-a) + exp(a)) and its first three derivatives.
struct LogPartition {
    double value;
    double d1;  // tanh(a) = 2 sigma(2a) - 1
    double d2;  // sech^2(a) = 4 sigma(2a)(1 - sigma(2a))
    double d3;  // -2 d2 d1
};
LogPartition log_partition(double a);

// Second-order surrogate: logistic loss plus 0.5 A''(w^T x) V[w^T x~].
// Valid for unbiased corruption only; rejects dropout and multinomial.
double logloss_quadratic_approx(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm,
                                const CorruptionSpec& spec, const Eigen::VectorXd& w,
                                Eigen::VectorXd* grad = nullptr);

// Jensen upper bound (1/N) sum log(1 + prod_d E[exp(-y_n w_d x~_nd)]),
// evaluated with per-example log-MGF sums and a stable log1p branch.
double logloss_jensen(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm, const CorruptionSpec& spec,
                      const Eigen::VectorXd& w, Eigen::VectorXd* grad = nullptr);

// Variational family: log(prod_d E[exp(lambda y w_d x~)] +
// prod_d E[exp((lambda-1) y w_d x~)]) - lambda y w^T x, averaged. The case
// lambda = 0 is the Jensen bound, on the same code path.
double logloss_variational(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm,
                           const CorruptionSpec& spec, const Eigen::VectorXd& w, double lambda,
                           Eigen::VectorXd* grad = nullptr);

// Multi-class Jensen bound with one-hot labels (softmax form):
// -(1/N) sum_n [S_n(y_n) - logsumexp_{y'} S_n(y')], S_n(y') = sum_d
// log E[exp(y'^T W_d x~_nd)]. Reduces to softmax cross-entropy at q = 0.
double logloss_jensen_multiclass(const SparseExampleSet& set, const CorruptionSpec& spec,
                                 const Eigen::MatrixXd& weights, Eigen::MatrixXd* grad = nullptr);

// Margin form of the multi-class Jensen bound:
// (1/N) sum_n log(1 + sum_{c != c_n} prod_d E[exp((W_dc - W_dc_n) x~_nd)]).
// This is the direct K-class extension of the binary bound (identical to it
// at K = 2) and keeps the bound sensitive to score differences, which is
// what drives robustness to feature deletion. Convex in W.
double logloss_jensen_multiclass_margin(const SparseExampleSet& set, const CorruptionSpec& spec,
                                        const Eigen::MatrixXd& weights, Eigen::MatrixXd* grad = nullptr);

// Grid over {0, 0.05, ..., 1} followed by golden-section refinement of the
// best bracket to width 1e-3.
double optimize_lambda(const std::function<double(double)>& objective);

struct MarginalizedPrediction {
    Eigen::VectorXd probabilities;    // per class, in class-id order
    Eigen::VectorXd standard_errors;  // Monte-Carlo s.e. per class
};

// Monte-Carlo average of sigmoid/softmax predictions over corrupted copies
// of one row. A single weight column means the binary pm-one convention.
MarginalizedPrediction predict_marginalized(const Eigen::MatrixXd& weights, const CorruptionSpec& spec,
                                            const SparseRow& row, int n_features, int n_samples,
                                            std::uint64_t seed);

}  // namespace mcf
