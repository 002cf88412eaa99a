#include "mcf/quadratic.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcf/reduce.hpp"

namespace mcf {

namespace {

// Per-feature variance at a structural zero; nonzero only for additive noise.
Eigen::VectorXd zero_variances(const SparseExampleSet& set, const CorruptionSpec& spec) {
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(set.n_features);
    if (spec.additive())
        for (int d = 0; d < set.n_features; ++d) v0[d] = moments(spec, 0.0, d).variance;
    return v0;
}

}  // namespace

SparseRow mean_row(const SparseExampleSet& set, const CorruptionSpec& spec, int n) {
    SparseRow out = set.rows[n];
    for (auto& [d, x] : out) x = moments(spec, x, d).mean;
    return out;
}

Eigen::MatrixXd assemble_system(const SparseExampleSet& set, const CorruptionSpec& spec, double l2) {
    const int d_total = set.n_features;
    const int n = set.n_examples();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d_total, d_total);

    const Eigen::VectorXd v0 = zero_variances(set, spec);
    a.diagonal() += static_cast<double>(n) * v0;

    SparseRow means;
    for (int i = 0; i < n; ++i) {
        means = set.rows[i];
        for (auto& [d, x] : means) {
            const Moments m = moments(spec, x, d);
            a(d, d) += m.variance - v0[d];
            x = m.mean;
        }
        for (const auto& [dj, mj] : means)
            for (const auto& [dk, mk] : means)
                if (dk <= dj) a(dj, dk) += mj * mk;
    }
    for (int d = 0; d < d_total; ++d)
        if (d != set.bias_index) a(d, d) += static_cast<double>(n) * l2;
    a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
    return a;
}

double expected_quadratic_loss(const SparseExampleSet& set, const Eigen::VectorXd& targets,
                               const CorruptionSpec& spec, const Eigen::VectorXd& w) {
    const int n = set.n_examples();
    const Eigen::VectorXd v0 = zero_variances(set, spec);
    double base_var = 0.0;
    for (int d = 0; d < set.n_features; ++d) base_var += w[d] * w[d] * v0[d];

    return pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        double score = 0.0;
        double var = base_var;
        for (const auto& [d, x] : set.rows[i]) {
            const Moments m = moments(spec, x, d);
            score += w[d] * m.mean;
            var += w[d] * w[d] * (m.variance - v0[d]);
        }
        const double r = score - targets[static_cast<int>(i)];
        return r * r + var;
    }) / n;
}

QuadSolveResult solve_quadratic(const SparseExampleSet& set, const Eigen::MatrixXd& targets,
                                const CorruptionSpec& spec, double l2) {
    const int d_total = set.n_features;
    const int n = set.n_examples();
    if (targets.rows() != n) throw std::invalid_argument("target rows do not match example count");

    Eigen::MatrixXd a = assemble_system(set, spec, l2);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d_total, targets.cols());
    for (int i = 0; i < n; ++i)
        for (const auto& [d, m] : mean_row(set, spec, i)) b.row(d) += m * targets.row(i);

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        a.diagonal().array() += 1e-12 * a.trace() / d_total;
        llt.compute(a);
        if (llt.info() != Eigen::Success) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
            const Eigen::VectorXd pivots = ldlt.vectorD();
            int weakest = 0;
            double smallest = std::numeric_limits<double>::infinity();
            for (int k = 0; k < pivots.size(); ++k) {
                const double p = std::isfinite(pivots[k]) ? std::abs(pivots[k]) : -1.0;
                if (p < smallest) {
                    smallest = p;
                    weakest = k;
                }
            }
            Eigen::VectorXi order = Eigen::VectorXi::LinSpaced(d_total, 0, d_total - 1);
            order = ldlt.transpositionsP() * order;
            throw std::runtime_error("singular quadratic system; null direction along feature " +
                                     std::to_string(order[weakest]));
        }
    }

    QuadSolveResult result;
    result.weights = llt.solve(b);
    result.hat_diag.resize(n);
    result.train_predictions.resize(n, targets.cols());
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d_total);
    for (int i = 0; i < n; ++i) {
        const SparseRow means = mean_row(set, spec, i);
        for (const auto& [d, m] : means) e[d] = m;
        const Eigen::VectorXd z = llt.matrixL().solve(e);
        result.hat_diag[i] = z.squaredNorm();
        Eigen::RowVectorXd pred = Eigen::RowVectorXd::Zero(targets.cols());
        for (const auto& [d, m] : means) pred += m * result.weights.row(d);
        result.train_predictions.row(i) = pred;
        for (const auto& [d, m] : means) e[d] = 0.0;
    }
    return result;
}

double leave_one_out(const QuadSolveResult& result, const Eigen::VectorXd& targets) {
    const int n = static_cast<int>(targets.size());
    if (result.train_predictions.cols() != 1 || result.train_predictions.rows() != n)
        throw std::invalid_argument("leave_one_out expects a single-column solve over the same targets");
    for (int i = 0; i < n; ++i)
        if (std::abs(1.0 - result.hat_diag[i]) < 1e-12)
            throw std::runtime_error("leave-one-out undefined: example " + std::to_string(i) +
                                     " is interpolated exactly (H_nn = 1)");
    return pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double r = (targets[static_cast<int>(i)] - result.train_predictions(static_cast<int>(i), 0)) /
                         (1.0 - result.hat_diag[static_cast<int>(i)]);
        return r * r;
    }) / n;
}

}  // namespace mcf
