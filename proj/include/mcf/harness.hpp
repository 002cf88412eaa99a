#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"
#include "mcf/optimize.hpp"
#include "mcf/types.hpp"

namespace mcf {

struct TrainConfig {
    LossKind loss = LossKind::Logistic;
    Surrogate surrogate = Surrogate::Jensen;  // logistic only
    CorruptionSpec spec;
    double l2 = 0.0;  // applied to the mean loss, bias excluded
    optimize::OptimConfig optimizer;
    std::uint64_t seed = 0;
};

struct LinearModel {
    Eigen::MatrixXd weights;  // D x K; a single column is the binary pm-one discriminant
    std::vector<std::string> class_names;
    int bias_index = -1;
    LossKind loss = LossKind::Logistic;
    Surrogate surrogate = Surrogate::Jensen;
    CorruptionSpec spec;
    double l2 = 0.0;
    double lambda = 0.0;  // variational surrogate only
    std::uint64_t seed = 0;
    std::string fingerprint;

    int n_features() const { return static_cast<int>(weights.rows()); }
    bool binary() const { return weights.cols() == 1; }
};

// Quadratic loss solves in closed form; the other losses run L-BFGS from
// w0 = 0. The variational surrogate alternates two rounds of weight
// optimization with a lambda grid/golden search.
LinearModel train(const SparseExampleSet& set, const TrainConfig& config);

struct Prediction {
    std::vector<int> label_ids;
    Eigen::MatrixXd scores;  // N x K (N x 1 for binary)
};

Prediction predict(const LinearModel& model, const SparseExampleSet& set);
Prediction predict_marginalized_set(const LinearModel& model, const SparseExampleSet& set, int n_samples,
                                    std::uint64_t seed);

double error_rate(const LinearModel& model, const SparseExampleSet& set);

struct CrossValPoint {
    double corruption_param = 0.0;
    double l2 = 0.0;
    double mean_error = 0.0;     // 0/1 validation error
    double mean_squared = 0.0;   // squared validation residual (quadratic loss, binary)
};

struct CrossValResult {
    CrossValPoint best;
    std::vector<CrossValPoint> table;
    std::vector<int> fold_of_example;  // recorded for reproducibility
};

// Stratified K-fold over (corruption parameter) x (l2) with deterministic
// tie-breaking toward smaller corruption, then smaller l2. For parameterless
// corruption kinds pass a single dummy corruption value.
CrossValResult cross_validate(const SparseExampleSet& set, const TrainConfig& base,
                              const std::vector<double>& corruption_params, const std::vector<double>& l2_values,
                              int folds, std::uint64_t seed);

// Independent feature deletion at rate `level` (bias kept), seeded.
SparseExampleSet delete_features(const SparseExampleSet& set, double level, std::uint64_t seed);

struct NightmareLevel {
    double level = 0.0;
    double error = 0.0;
    double chosen_param = 0.0;
    double chosen_l2 = 0.0;
};

struct EvalReport {
    double error = 0.0;
    Eigen::MatrixXi confusion;  // true class x predicted class
    std::vector<NightmareLevel> levels;
    double loo = std::numeric_limits<double>::quiet_NaN();
};

// Nightmare-at-test-time protocol: per deletion level, corrupt the test set;
// in transductive mode re-select (param, l2) per level on a held-out quarter
// of the training set corrupted at the same level.
EvalReport nightmare_eval(const SparseExampleSet& train_set, const SparseExampleSet& test_set,
                          const TrainConfig& base, const std::vector<double>& corruption_params,
                          const std::vector<double>& l2_values, const std::vector<double>& levels,
                          std::uint64_t seed, bool transductive);

// Versioned, checksummed text format; weights carry 17 significant digits so
// loading reproduces predictions bit-identically.
void save_model(const LinearModel& model, const std::string& path);
std::string model_to_string(const LinearModel& model);
LinearModel load_model(const std::string& path);
LinearModel model_from_string(const std::string& text);

Eigen::MatrixXi confusion_matrix(const LinearModel& model, const SparseExampleSet& set);

}  // namespace mcf
