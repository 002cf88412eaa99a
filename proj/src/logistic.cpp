#include "mcf/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "logmgf_detail.hpp"
#include "mcf/reduce.hpp"
#include "mcf/rng.hpp"

namespace mcf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double poisoned(Eigen::VectorXd* grad) {
    if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
    return kInf;
}

// log(e^a + e^b) without overflow.
double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    if (std::isinf(m)) return m;
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

LogPartition log_partition(double a) {
    const double d1 = std::tanh(a);
    const double d2 = 1.0 - d1 * d1;
    return {std::abs(a) + std::log1p(std::exp(-2.0 * std::abs(a))), d1, d2, -2.0 * d2 * d1};
}

double logloss_quadratic_approx(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm,
                                const CorruptionSpec& spec, const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
    if (!spec.unbiased())
        throw std::invalid_argument(
            "the quadratic approximation assumes unbiased corruption; dropout and multinomial are not supported");
    const int n = set.n_examples();
    if (labels_pm.size() != n) throw std::invalid_argument("label count does not match example count");
    if (grad) grad->setZero(w.size());

    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(w.size());
    double base_var = 0.0;
    if (spec.additive()) {
        for (int d = 0; d < w.size(); ++d) {
            v0[d] = moments(spec, 0.0, d).variance;
            base_var += w[d] * w[d] * v0[d];
        }
    }

    double curvature_weight = 0.0;  // sum_n A''(s_n) for the dense gradient term
    const double loss = pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        const double y = labels_pm[static_cast<int>(i)];
        const double s = sparse_dot(set.rows[i], w);
        double var = base_var;
        for (const auto& [d, x] : set.rows[i]) var += w[d] * w[d] * (moments(spec, x, d).variance - v0[d]);
        const LogPartition lp = log_partition(s);
        if (grad) {
            curvature_weight += lp.d2;
            const double score_coef = (-y + lp.d1 + 0.5 * lp.d3 * var) / n;
            for (const auto& [d, x] : set.rows[i]) {
                (*grad)[d] += score_coef * x;
                (*grad)[d] += lp.d2 * w[d] * (moments(spec, x, d).variance - v0[d]) / n;
            }
        }
        return -y * s + lp.value + 0.5 * lp.d2 * var;
    }) / n;

    if (grad && spec.additive()) *grad += (curvature_weight / n) * v0.cwiseProduct(w);
    return loss;
}

double logloss_variational(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm,
                           const CorruptionSpec& spec, const Eigen::VectorXd& w, double lambda,
                           Eigen::VectorXd* grad) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    const int n = set.n_examples();
    if (labels_pm.size() != n) throw std::invalid_argument("label count does not match example count");
    if (grad) grad->setZero(w.size());
    if (detail::laplace_pole(spec, w, lambda) || detail::laplace_pole(spec, w, 1.0 - lambda))
        return poisoned(grad);

    // Scales of the two MGF products; Z and dZ are even in the label sign.
    Eigen::VectorXd dz_u, dz_v;
    const double z_u = detail::additive_zero_sum(spec, w, lambda, grad ? &dz_u : nullptr);
    const double z_v = detail::additive_zero_sum(spec, w, 1.0 - lambda, grad ? &dz_v : nullptr);

    std::vector<double> scratch(std::max(1, spec.n_categories)), scratch2(std::max(1, spec.n_categories));
    double sum_pu = 0.0, sum_pv = 0.0;
    bool overflow = false;
    const double loss = pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t idx) {
        const int i = static_cast<int>(idx);
        const double y = labels_pm[i];
        const double cu = lambda * y;
        const double cv = (lambda - 1.0) * y;
        double u = z_u, v = z_v;
        if (lambda != 0.0)
            u += detail::row_logmgf_corrections(spec, set.rows[i], [&](int d) { return cu * w[d]; },
                                                scratch.data());
        v += detail::row_logmgf_corrections(spec, set.rows[i], [&](int d) { return cv * w[d]; }, scratch.data());
        const double s = sparse_dot(set.rows[i], w);
        const double value = logsumexp2(u, v) - lambda * y * s;
        if (!std::isfinite(value)) {
            overflow = true;
            return value;
        }
        if (grad) {
            const double m = std::max(u, v);
            const double eu = std::exp(u - m), ev = std::exp(v - m);
            const double pu = eu / (eu + ev), pv = ev / (eu + ev);
            sum_pu += pu;
            sum_pv += pv;
            if (lambda != 0.0)
                detail::row_logmgf_correction_grads(
                    spec, set.rows[i], [&](int d) { return cu * w[d]; }, scratch.data(), scratch2.data(),
                    [&](int d, double ds_dt) { (*grad)[d] += pu * cu * ds_dt / n; });
            detail::row_logmgf_correction_grads(
                spec, set.rows[i], [&](int d) { return cv * w[d]; }, scratch.data(), scratch2.data(),
                [&](int d, double ds_dt) { (*grad)[d] += pv * cv * ds_dt / n; });
            for (const auto& [d, x] : set.rows[i]) (*grad)[d] -= lambda * y * x / n;
        }
        return value;
    }) / n;

    if (overflow || !std::isfinite(loss)) return poisoned(grad);
    if (grad && spec.additive()) *grad += (sum_pu / n) * dz_u + (sum_pv / n) * dz_v;
    return loss;
}

double logloss_jensen(const SparseExampleSet& set, const Eigen::VectorXd& labels_pm, const CorruptionSpec& spec,
                      const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
    return logloss_variational(set, labels_pm, spec, w, 0.0, grad);
}

double logloss_jensen_multiclass(const SparseExampleSet& set, const CorruptionSpec& spec,
                                 const Eigen::MatrixXd& weights, Eigen::MatrixXd* grad) {
    const int n = set.n_examples();
    const int k = static_cast<int>(weights.cols());
    if (set.n_classes != k) throw std::invalid_argument("weight columns do not match class count");
    if (grad) grad->setZero(weights.rows(), k);
    if (detail::laplace_pole_cols(spec, weights)) {
        if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
        return kInf;
    }

    const Eigen::VectorXd z = detail::additive_zero_sum_cols(spec, weights);
    const bool blocks = spec.kind == CorruptionKind::Multinomial;

    std::vector<double> scratch(std::max(1, spec.n_categories)), scratch2(std::max(1, spec.n_categories));
    Eigen::VectorXd s(k), p(k);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);  // sum_n (p_nk - [c_n = k])
    Eigen::MatrixXd slopes;  // per (nonzero, class) d/dt cache for the scalar path
    std::vector<double> per_example(n);
    for (int i = 0; i < n; ++i) {
        const SparseRow& row = set.rows[i];
        const int nnz = static_cast<int>(row.size());
        if (grad && !blocks && slopes.rows() < nnz) slopes.resize(nnz, k);
        s = z;
        if (blocks) {
            for (int c = 0; c < k; ++c)
                s[c] += detail::row_logmgf_corrections(spec, row, [&](int d) { return weights(d, c); },
                                                       scratch.data());
        } else {
            for (int j = 0; j < nnz; ++j) {
                const auto& [d, x] = row[j];
                for (int c = 0; c < k; ++c) {
                    double slope;
                    s[c] += log_mgf_with_slope(spec, weights(d, c), x, d, &slope) -
                            log_mgf_zero(spec, weights(d, c), d);
                    if (grad) slopes(j, c) = slope;
                }
            }
        }
        const double m = s.maxCoeff();
        double total = 0.0;
        for (int c = 0; c < k; ++c) total += std::exp(s[c] - m);
        const double lse = m + std::log(total);
        per_example[i] = lse - s[set.labels[i]];
        if (grad) {
            for (int c = 0; c < k; ++c) p[c] = std::exp(s[c] - lse);
            p[set.labels[i]] -= 1.0;
            alpha += p;
            if (blocks) {
                for (int c = 0; c < k; ++c) {
                    if (p[c] == 0.0) continue;
                    detail::row_logmgf_correction_grads(
                        spec, row, [&](int d) { return weights(d, c); }, scratch.data(), scratch2.data(),
                        [&](int d, double ds_dt) { (*grad)(d, c) += p[c] * ds_dt / n; });
                }
            } else {
                for (int j = 0; j < nnz; ++j) {
                    const int d = row[j].index;
                    for (int c = 0; c < k; ++c)
                        (*grad)(d, c) +=
                            p[c] * (slopes(j, c) - dlog_mgf_zero_dt(spec, weights(d, c), d)) / n;
                }
            }
        }
    }
    if (grad && spec.additive()) {
        for (int c = 0; c < k; ++c)
            for (int d = 0; d < weights.rows(); ++d)
                (*grad)(d, c) += alpha[c] / n * dlog_mgf_zero_dt(spec, weights(d, c), d);
    }
    return pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) { return per_example[i]; }) / n;
}

double logloss_jensen_multiclass_margin(const SparseExampleSet& set, const CorruptionSpec& spec,
                                        const Eigen::MatrixXd& weights, Eigen::MatrixXd* grad) {
    const int n = set.n_examples();
    const int k = static_cast<int>(weights.cols());
    const int d_total = static_cast<int>(weights.rows());
    if (set.n_classes != k) throw std::invalid_argument("weight columns do not match class count");
    if (grad) grad->setZero(d_total, k);

    // Laplace pole over all pairwise column differences.
    if (spec.kind == CorruptionKind::Laplace) {
        for (int d = 0; d < d_total; ++d) {
            if (!spec.corrupts(d)) continue;
            const double reach = weights.row(d).maxCoeff() - weights.row(d).minCoeff();
            if (spec.param(d) * reach >= 1.0) {
                if (grad) grad->setConstant(std::numeric_limits<double>::quiet_NaN());
                return kInf;
            }
        }
    }

    // Z(c', c) = sum_d logmgf0((W_dc' - W_dc)); additive kinds only.
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k, k);
    if (spec.additive()) {
        for (int c = 0; c < k; ++c)
            for (int cp = 0; cp < k; ++cp) {
                if (cp == c) continue;
                double total = 0.0;
                for (int d = 0; d < d_total; ++d) total += log_mgf_zero(spec, weights(d, cp) - weights(d, c), d);
                z(cp, c) = total;
            }
    }

    std::vector<double> scratch(std::max(1, spec.n_categories)), scratch2(std::max(1, spec.n_categories));
    const bool blocks = spec.kind == CorruptionKind::Multinomial;
    Eigen::VectorXd s(k);
    Eigen::MatrixXd slopes;
    Eigen::MatrixXd pair_weight = Eigen::MatrixXd::Zero(k, k);  // sum_n p_n(c') per true class
    std::vector<double> per_example(n);
    for (int i = 0; i < n; ++i) {
        const SparseRow& row = set.rows[i];
        const int c = set.labels[i];
        const int nnz = static_cast<int>(row.size());
        if (grad && !blocks && slopes.rows() < nnz) slopes.resize(nnz, k);
        for (int cp = 0; cp < k; ++cp) s[cp] = cp == c ? 0.0 : z(cp, c);
        if (blocks) {
            for (int cp = 0; cp < k; ++cp) {
                if (cp == c) continue;
                s[cp] += detail::row_logmgf_corrections(
                    spec, row, [&](int d) { return weights(d, cp) - weights(d, c); }, scratch.data());
            }
        } else {
            for (int j = 0; j < nnz; ++j) {
                const auto& [d, x] = row[j];
                const double wc = weights(d, c);
                for (int cp = 0; cp < k; ++cp) {
                    if (cp == c) continue;
                    const double t = weights(d, cp) - wc;
                    double slope;
                    s[cp] += log_mgf_with_slope(spec, t, x, d, &slope) - log_mgf_zero(spec, t, d);
                    if (grad) slopes(j, cp) = slope;
                }
            }
        }

        // log(1 + sum_{c' != c} exp(s)) with the usual shift.
        double m = 0.0;
        for (int cp = 0; cp < k; ++cp)
            if (cp != c) m = std::max(m, s[cp]);
        double total = std::exp(-m);
        for (int cp = 0; cp < k; ++cp)
            if (cp != c) total += std::exp(s[cp] - m);
        const double value = m + std::log(total);
        per_example[i] = value;

        if (grad) {
            for (int cp = 0; cp < k; ++cp) {
                if (cp == c) continue;
                const double p = std::exp(s[cp] - value);  // exp(s)/(1 + sum exp(s))
                if (p == 0.0) continue;
                pair_weight(cp, c) += p;
                if (blocks) {
                    detail::row_logmgf_correction_grads(
                        spec, row, [&](int d) { return weights(d, cp) - weights(d, c); }, scratch.data(),
                        scratch2.data(), [&](int d, double ds_dt) {
                            (*grad)(d, cp) += p * ds_dt / n;
                            (*grad)(d, c) -= p * ds_dt / n;
                        });
                } else {
                    for (int j = 0; j < nnz; ++j) {
                        const int d = row[j].index;
                        const double ds_dt =
                            slopes(j, cp) - dlog_mgf_zero_dt(spec, weights(d, cp) - weights(d, c), d);
                        (*grad)(d, cp) += p * ds_dt / n;
                        (*grad)(d, c) -= p * ds_dt / n;
                    }
                }
            }
        }
    }
    if (grad && spec.additive()) {
        for (int c = 0; c < k; ++c)
            for (int cp = 0; cp < k; ++cp) {
                if (cp == c || pair_weight(cp, c) == 0.0) continue;
                const double scale = pair_weight(cp, c) / n;
                for (int d = 0; d < d_total; ++d) {
                    const double ds_dt = dlog_mgf_zero_dt(spec, weights(d, cp) - weights(d, c), d);
                    (*grad)(d, cp) += scale * ds_dt;
                    (*grad)(d, c) -= scale * ds_dt;
                }
            }
    }
    return pairwise_sum(static_cast<std::size_t>(n), [&](std::size_t i) { return per_example[i]; }) / n;
}

double optimize_lambda(const std::function<double(double)>& objective) {
    double best_lambda = 0.0;
    double best_value = kInf;
    auto consider = [&](double lambda) {
        const double value = objective(lambda);
        if (value < best_value) {
            best_value = value;
            best_lambda = lambda;
        }
        return value;
    };

    int best_index = 0;
    for (int i = 0; i <= 20; ++i) {
        const double lambda = 0.05 * i;
        const double before = best_value;
        consider(lambda);
        if (best_value < before) best_index = i;
    }

    // Golden-section refinement of the winning bracket.
    constexpr double kRatio = 0.61803398874989484820;
    double lo = std::max(0.0, 0.05 * (best_index - 1));
    double hi = std::min(1.0, 0.05 * (best_index + 1));
    double x1 = hi - kRatio * (hi - lo);
    double x2 = lo + kRatio * (hi - lo);
    double f1 = consider(x1);
    double f2 = consider(x2);
    while (hi - lo > 1e-3) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kRatio * (hi - lo);
            f1 = consider(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kRatio * (hi - lo);
            f2 = consider(x2);
        }
    }
    return best_lambda;
}

MarginalizedPrediction predict_marginalized(const Eigen::MatrixXd& weights, const CorruptionSpec& spec,
                                            const SparseRow& row, int n_features, int n_samples,
                                            std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("marginalized prediction needs n_samples >= 1");
    const bool binary = weights.cols() == 1;
    const int k = binary ? 2 : static_cast<int>(weights.cols());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd p(k);
    for (int m = 0; m < n_samples; ++m) {
        const SparseRow corrupted = sample_corrupted(spec, row, n_features, hash_seed(seed, m));
        if (binary) {
            double s = 0.0;
            for (const auto& [d, x] : corrupted) s += x * weights(d, 0);
            const double sigma = 1.0 / (1.0 + std::exp(-s));
            p[0] = sigma;
            p[1] = 1.0 - sigma;
        } else {
            Eigen::VectorXd scores = Eigen::VectorXd::Zero(k);
            for (const auto& [d, x] : corrupted) scores += x * weights.row(d).transpose();
            const double m0 = scores.maxCoeff();
            p = (scores.array() - m0).exp().matrix();
            p /= p.sum();
        }
        mean += p;
        sumsq += p.cwiseProduct(p);
    }
    mean /= n_samples;

    MarginalizedPrediction out;
    out.probabilities = mean;
    out.standard_errors = Eigen::VectorXd::Zero(k);
    if (n_samples > 1) {
        for (int c = 0; c < k; ++c) {
            const double var = std::max(0.0, (sumsq[c] - n_samples * mean[c] * mean[c]) / (n_samples - 1));
            out.standard_errors[c] = std::sqrt(var / n_samples);
        }
    }
    return out;
}

}  // namespace mcf
