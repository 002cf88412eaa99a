#include "mcf/explicit_corruption.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcf/reduce.hpp"
#include "mcf/rng.hpp"

namespace mcf {

namespace {

double plain_loss(LossKind loss, double score, double target) {
    switch (loss) {
        case LossKind::Quadratic: {
            const double r = score - target;
            return r * r;
        }
        case LossKind::Exponential: {
            const double a = -target * score;
            return a > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(a);
        }
        case LossKind::Logistic: {
            const double a = -target * score;
            return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
        }
    }
    return 0.0;
}

}  // namespace

SparseExampleSet replicate(const SparseExampleSet& set, const CorruptionSpec& spec, int m, std::uint64_t seed,
                           double max_nonzeros) {
    if (m < 1) throw std::invalid_argument("replicate requires M >= 1");
    const double nnz_bound = spec.additive()
                                 ? static_cast<double>(set.n_examples()) * m * set.n_features
                                 : static_cast<double>(set.n_nonzeros()) * m;
    if (nnz_bound > max_nonzeros)
        throw std::runtime_error("replicated set would exceed the nonzero cap (" + std::to_string(nnz_bound) +
                                 " > " + std::to_string(max_nonzeros) + ")");

    SparseExampleSet out;
    out.n_features = set.n_features;
    out.n_classes = set.n_classes;
    out.bias_index = set.bias_index;
    out.class_names = set.class_names;
    out.rows.reserve(static_cast<std::size_t>(set.n_examples()) * m);
    out.labels.reserve(static_cast<std::size_t>(set.n_examples()) * m);
    for (int i = 0; i < set.n_examples(); ++i) {
        for (int r = 0; r < m; ++r) {
            out.rows.push_back(sample_corrupted(spec, set.rows[i], set.n_features, hash_seed(seed, i, r)));
            out.labels.push_back(set.labels[i]);
        }
    }
    return out;
}

McLossEstimate mc_expected_loss(const SparseExampleSet& set, const Eigen::VectorXd& targets_pm,
                                const CorruptionSpec& spec, const Eigen::VectorXd& w, LossKind loss, int m,
                                std::uint64_t seed) {
    const int n = set.n_examples();
    if (targets_pm.size() != n) throw std::invalid_argument("target count does not match example count");

    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < m; ++r) {
        const double replica_loss = pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
            const SparseRow row = sample_corrupted(spec, set.rows[i], set.n_features, hash_seed(seed, i, r));
            return plain_loss(loss, sparse_dot(row, w), targets_pm[static_cast<int>(i)]);
        }) / n;
        sum += replica_loss;
        sumsq += replica_loss * replica_loss;
    }

    McLossEstimate est;
    est.mean = sum / m;
    if (m > 1) {
        const double var = std::max(0.0, (sumsq - m * est.mean * est.mean) / (m - 1));
        est.standard_error = std::sqrt(var / m);
    }
    return est;
}

}  // namespace mcf
