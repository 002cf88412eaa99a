#include "mcf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mcf/exponential.hpp"
#include "mcf/logistic.hpp"
#include "mcf/quadratic.hpp"
#include "mcf/rng.hpp"

namespace mcf {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_text(const TrainConfig& c, int n_features) {
    std::string s = std::string(loss_kind_name(c.loss)) + "|" + surrogate_name(c.surrogate) + "|" +
                    corruption_kind_name(c.spec.kind) + "|" + std::to_string(c.l2) + "|" +
                    std::to_string(c.seed) + "|" + std::to_string(n_features);
    if (c.spec.params.size() > 0) s += "|" + std::to_string(c.spec.params.mean());
    return s;
}

// l2 * ||w||^2 against the mean loss, bias row excluded.
double l2_penalty(const MatrixXd& w, double l2, int bias_index, MatrixXd* grad) {
    if (l2 == 0.0) return 0.0;
    double pen = 0.0;
    for (int d = 0; d < w.rows(); ++d) {
        if (d == bias_index) continue;
        pen += w.row(d).squaredNorm();
        if (grad) grad->row(d) += 2.0 * l2 * w.row(d);
    }
    return l2 * pen;
}

optimize::Objective flat_objective(int d_total, int k,
                                   std::function<double(const MatrixXd&, MatrixXd*)> matrix_loss) {
    return [=, matrix_loss = std::move(matrix_loss)](const VectorXd& flat, VectorXd* grad) {
        const Eigen::Map<const MatrixXd> w(flat.data(), d_total, k);
        if (!grad) return matrix_loss(w, nullptr);
        MatrixXd g(d_total, k);
        const double value = matrix_loss(w, &g);
        *grad = Eigen::Map<const VectorXd>(g.data(), d_total * k);
        return value;
    };
}

VectorXd run_minimize(const optimize::Objective& objective, int dim, const optimize::OptimConfig& config) {
    return optimize::minimize(objective, VectorXd::Zero(dim), config).w;
}

CorruptionSpec spec_with_param(const CorruptionSpec& base, int n_features, double value) {
    CorruptionSpec out = base;
    if (base.kind != CorruptionKind::None && base.kind != CorruptionKind::Poisson)
        out.params = VectorXd::Constant(n_features, value);
    return out;
}

SparseExampleSet subset(const SparseExampleSet& set, const std::vector<int>& keep) {
    SparseExampleSet out;
    out.n_features = set.n_features;
    out.n_classes = set.n_classes;
    out.bias_index = set.bias_index;
    out.class_names = set.class_names;
    out.rows.reserve(keep.size());
    out.labels.reserve(keep.size());
    for (int i : keep) {
        out.rows.push_back(set.rows[i]);
        out.labels.push_back(set.labels[i]);
    }
    return out;
}

// Stratified fold ids: per-class seeded shuffle, dealt round-robin with a
// counter shared across classes (so folds = N yields leave-one-out). Every
// class must span at least two folds, otherwise some training split would
// miss it entirely.
std::vector<int> stratified_folds(const SparseExampleSet& set, int folds, std::uint64_t seed) {
    if (folds > set.n_examples())
        throw std::invalid_argument("more folds than examples");
    std::vector<int> fold_of(set.n_examples(), -1);
    int counter = 0;
    for (int c = 0; c < set.n_classes; ++c) {
        std::vector<int> members;
        for (int i = 0; i < set.n_examples(); ++i)
            if (set.labels[i] == c) members.push_back(i);
        Rng rng(hash_seed(seed, 0xf01d5ull, c));
        for (int j = static_cast<int>(members.size()) - 1; j > 0; --j)
            std::swap(members[j], members[rng.uniform_int(j + 1)]);
        int first_fold = -1;
        bool spans_two = false;
        for (int member : members) {
            const int f = counter++ % folds;
            fold_of[member] = f;
            if (first_fold < 0) first_fold = f;
            spans_two |= f != first_fold;
        }
        if (!spans_two && folds > 1)
            throw std::runtime_error("class '" + set.class_names[c] +
                                     "' would be absent from every other fold's training split; use fewer folds");
    }
    return fold_of;
}

}  // namespace

LinearModel train(const SparseExampleSet& set, const TrainConfig& config) {
    const int d_total = set.n_features;
    const int k = set.n_classes;
    if (k < 2) throw std::invalid_argument("training requires at least two classes");
    config.spec.validate(d_total);

    LinearModel model;
    model.class_names = set.class_names;
    model.bias_index = set.bias_index;
    model.loss = config.loss;
    model.surrogate = config.loss == LossKind::Logistic ? config.surrogate : Surrogate::None;
    model.spec = config.spec;
    model.l2 = config.l2;
    model.seed = config.seed;

    char fp[20];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_text(config, d_total))));
    model.fingerprint = fp;

    switch (config.loss) {
        case LossKind::Quadratic: {
            MatrixXd targets;
            if (k == 2) {
                targets = encode_labels(set, LabelScheme::PmOne);
            } else {
                targets = 2.0 * encode_labels(set, LabelScheme::OneHot).array() - 1.0;  // one-vs-rest
            }
            model.weights = solve_quadratic(set, targets, config.spec, config.l2).weights;
            return model;
        }
        case LossKind::Exponential: {
            if (k == 2) {
                const VectorXd y = encode_labels(set, LabelScheme::PmOne);
                auto objective = [&](const VectorXd& w, VectorXd* grad) {
                    const double value = exp_loss(set, y, config.spec, w, grad);
                    if (!std::isfinite(value)) return value;
                    double pen = 0.0;
                    for (int d = 0; d < d_total; ++d) {
                        if (d == set.bias_index) continue;
                        pen += w[d] * w[d];
                        if (grad) (*grad)[d] += 2.0 * config.l2 * w[d];
                    }
                    return value + config.l2 * pen;
                };
                model.weights = run_minimize(objective, d_total, config.optimizer);
            } else {
                auto matrix_loss = [&](const MatrixXd& w, MatrixXd* grad) {
                    const double value = exp_loss_multiclass(set, config.spec, w, grad);
                    if (!std::isfinite(value)) return value;
                    return value + l2_penalty(w, config.l2, set.bias_index, grad);
                };
                const VectorXd flat =
                    run_minimize(flat_objective(d_total, k, matrix_loss), d_total * k, config.optimizer);
                model.weights = Eigen::Map<const MatrixXd>(flat.data(), d_total, k);
            }
            return model;
        }
        case LossKind::Logistic: {
            if (config.surrogate == Surrogate::None)
                throw std::invalid_argument("logistic loss requires a surrogate");
            if (k > 2) {
                if (config.surrogate != Surrogate::Jensen)
                    throw std::invalid_argument("multi-class logistic training supports the jensen surrogate only");
                // Train on the margin form: it coincides with the binary
                // bound at K = 2 and stays sensitive to score differences.
                auto matrix_loss = [&](const MatrixXd& w, MatrixXd* grad) {
                    const double value = logloss_jensen_multiclass_margin(set, config.spec, w, grad);
                    if (!std::isfinite(value)) return value;
                    return value + l2_penalty(w, config.l2, set.bias_index, grad);
                };
                const VectorXd flat =
                    run_minimize(flat_objective(d_total, k, matrix_loss), d_total * k, config.optimizer);
                model.weights = Eigen::Map<const MatrixXd>(flat.data(), d_total, k);
                return model;
            }
            const VectorXd y = encode_labels(set, LabelScheme::PmOne);
            auto objective_for = [&](Surrogate surrogate, double lambda) {
                return [&, surrogate, lambda](const VectorXd& w, VectorXd* grad) {
                    double value = 0.0;
                    switch (surrogate) {
                        case Surrogate::QuadraticApprox:
                            value = logloss_quadratic_approx(set, y, config.spec, w, grad);
                            break;
                        case Surrogate::Jensen: value = logloss_jensen(set, y, config.spec, w, grad); break;
                        case Surrogate::Variational:
                            value = logloss_variational(set, y, config.spec, w, lambda, grad);
                            break;
                        default: throw std::logic_error("unreachable");
                    }
                    if (!std::isfinite(value)) return value;
                    double pen = 0.0;
                    for (int d = 0; d < d_total; ++d) {
                        if (d == set.bias_index) continue;
                        pen += w[d] * w[d];
                        if (grad) (*grad)[d] += 2.0 * config.l2 * w[d];
                    }
                    return value + config.l2 * pen;
                };
            };
            if (config.surrogate == Surrogate::Variational) {
                // Eq-style alternation: the bound is not jointly convex in
                // (w, lambda), so alternate full w fits with lambda searches.
                double lambda = 0.0;
                VectorXd w = run_minimize(objective_for(Surrogate::Variational, lambda), d_total, config.optimizer);
                for (int round = 0; round < 2; ++round) {
                    lambda = optimize_lambda(
                        [&](double l) { return logloss_variational(set, y, config.spec, w, l); });
                    w = optimize::minimize(objective_for(Surrogate::Variational, lambda), w, config.optimizer).w;
                }
                model.lambda = lambda;
                model.weights = w;
            } else {
                model.weights = run_minimize(objective_for(config.surrogate, 0.0), d_total, config.optimizer);
            }
            return model;
        }
    }
    throw std::logic_error("unreachable");
}

Prediction predict(const LinearModel& model, const SparseExampleSet& set) {
    if (set.n_features != model.n_features())
        throw std::invalid_argument("feature dimension mismatch: data has " + std::to_string(set.n_features) +
                                    ", model expects " + std::to_string(model.n_features()));
    const int n = set.n_examples();
    Prediction out;
    out.label_ids.resize(n);
    if (model.binary()) {
        out.scores.resize(n, 1);
        const VectorXd w = model.weights.col(0);
        for (int i = 0; i < n; ++i) {
            const double s = sparse_dot(set.rows[i], w);
            out.scores(i, 0) = s;
            out.label_ids[i] = s >= 0.0 ? 0 : 1;
        }
    } else {
        const int k = static_cast<int>(model.weights.cols());
        out.scores.resize(n, k);
        for (int i = 0; i < n; ++i) {
            Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(k);
            for (const auto& [d, x] : set.rows[i]) s += x * model.weights.row(d);
            out.scores.row(i) = s;
            int best = 0;
            s.maxCoeff(&best);  // first maximum: ties break to the lowest id
            out.label_ids[i] = best;
        }
    }
    return out;
}

Prediction predict_marginalized_set(const LinearModel& model, const SparseExampleSet& set, int n_samples,
                                    std::uint64_t seed) {
    if (set.n_features != model.n_features())
        throw std::invalid_argument("feature dimension mismatch: data has " + std::to_string(set.n_features) +
                                    ", model expects " + std::to_string(model.n_features()));
    const int n = set.n_examples();
    const int k = model.binary() ? 2 : static_cast<int>(model.weights.cols());
    Prediction out;
    out.label_ids.resize(n);
    out.scores.resize(n, k);
    for (int i = 0; i < n; ++i) {
        const MarginalizedPrediction p =
            predict_marginalized(model.weights, model.spec, set.rows[i], set.n_features, n_samples,
                                 hash_seed(seed, i));
        out.scores.row(i) = p.probabilities.transpose();
        int best = 0;
        p.probabilities.maxCoeff(&best);
        out.label_ids[i] = best;
    }
    return out;
}

double error_rate(const LinearModel& model, const SparseExampleSet& set) {
    const Prediction pred = predict(model, set);
    int errors = 0;
    for (int i = 0; i < set.n_examples(); ++i) errors += pred.label_ids[i] != set.labels[i];
    return set.n_examples() == 0 ? 0.0 : static_cast<double>(errors) / set.n_examples();
}

Eigen::MatrixXi confusion_matrix(const LinearModel& model, const SparseExampleSet& set) {
    const Prediction pred = predict(model, set);
    const int k = set.n_classes;
    Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(k, std::max(k, 2));
    for (int i = 0; i < set.n_examples(); ++i) confusion(set.labels[i], pred.label_ids[i]) += 1;
    return confusion;
}

CrossValResult cross_validate(const SparseExampleSet& set, const TrainConfig& base,
                              const std::vector<double>& corruption_params, const std::vector<double>& l2_values,
                              int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("cross-validation requires folds >= 2");
    if (corruption_params.empty() || l2_values.empty())
        throw std::invalid_argument("cross-validation grid must be non-empty");

    CrossValResult result;
    result.fold_of_example = stratified_folds(set, folds, seed);

    std::vector<double> params_sorted = corruption_params;
    std::vector<double> l2_sorted = l2_values;
    std::sort(params_sorted.begin(), params_sorted.end());
    std::sort(l2_sorted.begin(), l2_sorted.end());

    // Per-fold splits, shared across grid points.
    std::vector<std::vector<int>> train_idx(folds), val_idx(folds);
    for (int i = 0; i < set.n_examples(); ++i) {
        for (int f = 0; f < folds; ++f)
            (result.fold_of_example[i] == f ? val_idx[f] : train_idx[f]).push_back(i);
    }

    const bool quadratic_binary = base.loss == LossKind::Quadratic && set.n_classes == 2;
    bool have_best = false;
    for (double cp : params_sorted) {
        for (double l2 : l2_sorted) {
            TrainConfig config = base;
            config.spec = spec_with_param(base.spec, set.n_features, cp);
            config.l2 = l2;
            long errors = 0;
            double squared = 0.0;
            for (int f = 0; f < folds; ++f) {
                const SparseExampleSet train_set = subset(set, train_idx[f]);
                const SparseExampleSet val_set = subset(set, val_idx[f]);
                const LinearModel model = train(train_set, config);
                const Prediction pred = predict(model, val_set);
                for (int j = 0; j < val_set.n_examples(); ++j) {
                    errors += pred.label_ids[j] != val_set.labels[j];
                    if (quadratic_binary) {
                        const double y = val_set.labels[j] == 0 ? 1.0 : -1.0;
                        const double r = pred.scores(j, 0) - y;
                        squared += r * r;
                    }
                }
            }
            CrossValPoint point;
            point.corruption_param = cp;
            point.l2 = l2;
            point.mean_error = static_cast<double>(errors) / set.n_examples();
            point.mean_squared = quadratic_binary ? squared / set.n_examples()
                                                  : std::numeric_limits<double>::quiet_NaN();
            result.table.push_back(point);
            if (!have_best || point.mean_error < result.best.mean_error) {
                result.best = point;
                have_best = true;
            }
        }
    }
    return result;
}

SparseExampleSet delete_features(const SparseExampleSet& set, double level, std::uint64_t seed) {
    if (level <= 0.0) return set;
    SparseExampleSet out = set;
    for (int i = 0; i < out.n_examples(); ++i) {
        Rng rng(hash_seed(seed, 0xde1e7eull, i));
        SparseRow kept;
        kept.reserve(out.rows[i].size());
        for (const auto& feature : out.rows[i])
            if (feature.index == set.bias_index || rng.uniform() >= level) kept.push_back(feature);
        out.rows[i] = std::move(kept);
    }
    return out;
}

EvalReport nightmare_eval(const SparseExampleSet& train_set, const SparseExampleSet& test_set,
                          const TrainConfig& base, const std::vector<double>& corruption_params,
                          const std::vector<double>& l2_values, const std::vector<double>& levels,
                          std::uint64_t seed, bool transductive) {
    if (!std::is_sorted(levels.begin(), levels.end()))
        throw std::invalid_argument("deletion levels must be sorted ascending");

    std::vector<double> params_sorted =
        corruption_params.empty() ? std::vector<double>{0.0} : corruption_params;
    std::vector<double> l2_sorted = l2_values.empty() ? std::vector<double>{base.l2} : l2_values;
    std::sort(params_sorted.begin(), params_sorted.end());
    std::sort(l2_sorted.begin(), l2_sorted.end());

    EvalReport report;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double level = levels[li];
        const SparseExampleSet test_corrupted = delete_features(test_set, level, hash_seed(seed, 0x7e57ull, li));

        TrainConfig chosen = base;
        double chosen_param = base.spec.params.size() > 0 ? base.spec.params[0] : 0.0;
        double chosen_l2 = base.l2;
        if (transductive) {
            // Hyperparameters re-selected per level on a held-out quarter of
            // the training data, corrupted at the same deletion level.
            const std::vector<int> fold_of = stratified_folds(train_set, 4, hash_seed(seed, 0x5917ull, li));
            std::vector<int> fit_idx, val_idx;
            for (int i = 0; i < train_set.n_examples(); ++i)
                (fold_of[i] == 0 ? val_idx : fit_idx).push_back(i);
            const SparseExampleSet fit_set = subset(train_set, fit_idx);
            const SparseExampleSet val_set =
                delete_features(subset(train_set, val_idx), level, hash_seed(seed, 0x0a1ull, li));

            double best_error = std::numeric_limits<double>::infinity();
            for (double cp : params_sorted) {
                for (double l2 : l2_sorted) {
                    TrainConfig config = base;
                    config.spec = spec_with_param(base.spec, train_set.n_features, cp);
                    config.l2 = l2;
                    const double err = error_rate(train(fit_set, config), val_set);
                    if (err < best_error) {
                        best_error = err;
                        chosen = config;
                        chosen_param = cp;
                        chosen_l2 = l2;
                    }
                }
            }
        }

        const LinearModel model = train(train_set, chosen);
        NightmareLevel entry;
        entry.level = level;
        entry.error = error_rate(model, test_corrupted);
        entry.chosen_param = chosen_param;
        entry.chosen_l2 = chosen_l2;
        report.levels.push_back(entry);
        if (li == 0) {
            report.error = entry.error;
            report.confusion = confusion_matrix(model, test_corrupted);
        }
    }
    return report;
}

}  // namespace mcf
