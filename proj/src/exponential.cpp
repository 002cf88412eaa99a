#include "mcf/exponential.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "logmgf_detail.hpp"
#include "mcf/reduce.hpp"

namespace mcf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double poisoned(Eigen::VectorXd* grad) {
    if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
    return kInf;
}
}  // namespace

double exp_loss(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm, const CorruptionSpec& spec,
                const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
    const int n = set.n_examples();
    if (labels_pm.size() != n) throw std::invalid_argument("label count does not match example count");
    if (grad) grad->setZero(w.size());
    if (detail::laplace_pole(spec, w, 1.0)) return poisoned(grad);

    Eigen::VectorXd dz;
    const double z = detail::additive_zero_sum(spec, w, 1.0, grad ? &dz : nullptr);

    std::vector<double> scratch(std::max(1, spec.n_categories)), scratch2(std::max(1, spec.n_categories));
    std::vector<double> weight(grad ? n : 0);
    const double loss = pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double c = -labels_pm[static_cast<int>(i)];
        const double s =
            z + detail::row_logmgf_corrections(spec, set.rows[i], [&](int d) { return c * w[d]; }, scratch.data());
        const double p = detail::exp_guarded(s);
        if (grad) weight[i] = p / n;
        return p;
    }) / n;

    if (!std::isfinite(loss)) return poisoned(grad);
    if (grad) {
        double total_weight = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = -labels_pm[i];
            total_weight += weight[i];
            detail::row_logmgf_correction_grads(
                spec, set.rows[i], [&](int d) { return c * w[d]; }, scratch.data(), scratch2.data(),
                [&](int d, double ds_dt) { (*grad)[d] += weight[i] * c * ds_dt; });
        }
        if (spec.additive()) *grad += total_weight * dz;
    }
    return loss;
}

double exp_loss_multiclass(const SparseExampleSet& set, const CorruptionSpec& spec, const Eigen::MatrixXd& weights,
                           Eigen::MatrixXd* grad) {
    const int n = set.n_examples();
    const int k = static_cast<int>(weights.cols());
    const int d_total = static_cast<int>(weights.rows());
    if (set.n_classes != k) throw std::invalid_argument("weight columns do not match class count");
    if (grad) grad->setZero(d_total, k);

    // t(d, c) = -y_c^T W_d for the simplex label vector of class c.
    Eigen::MatrixXd t(d_total, k);
    const Eigen::VectorXd row_sums = weights.rowwise().sum();
    for (int c = 0; c < k; ++c)
        t.col(c) = (row_sums - static_cast<double>(k) * weights.col(c)) / static_cast<double>(k - 1);
    if (detail::laplace_pole_cols(spec, t)) {
        if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
        return kInf;
    }

    const Eigen::VectorXd z = detail::additive_zero_sum_cols(spec, t);

    std::vector<double> scratch(std::max(1, spec.n_categories)), scratch2(std::max(1, spec.n_categories));
    std::vector<double> weight(grad ? n : 0);
    const double loss = pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        const int c = set.labels[i];
        const double s =
            z[c] + detail::row_logmgf_corrections(spec, set.rows[i], [&](int d) { return t(d, c); }, scratch.data());
        const double p = detail::exp_guarded(s);
        if (grad) weight[i] = p / n;
        return p;
    }) / n;

    if (!std::isfinite(loss)) {
        if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
        return kInf;
    }
    if (grad) {
        // dt(d,c)/dW(d,j) = -y_{c,j} = 1/(K-1) - K/(K-1) [j = c].
        const double spread = 1.0 / (k - 1);
        Eigen::VectorXd class_weight = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i) {
            const int c = set.labels[i];
            class_weight[c] += weight[i];
            detail::row_logmgf_correction_grads(
                spec, set.rows[i], [&](int d) { return t(d, c); }, scratch.data(), scratch2.data(),
                [&](int d, double ds_dt) {
                    const double coef = weight[i] * ds_dt;
                    grad->row(d).array() += coef * spread;
                    (*grad)(d, c) -= coef * (1.0 + spread);
                });
        }
        if (spec.additive()) {
            for (int c = 0; c < k; ++c) {
                if (class_weight[c] == 0.0) continue;
                for (int d = 0; d < d_total; ++d) {
                    const double coef = class_weight[c] * dlog_mgf_zero_dt(spec, t(d, c), d);
                    grad->row(d).array() += coef * spread;
                    (*grad)(d, c) -= coef * (1.0 + spread);
                }
            }
        }
    }
    return loss;
}

}  // namespace mcf
