#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "mcf/harness.hpp"
#include "mcf/quadratic.hpp"
#include "test_utils.hpp"

using namespace mcf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TrainConfig basic_config(LossKind loss, Surrogate surrogate, const CorruptionSpec& spec, double l2 = 0.0) {
    TrainConfig config;
    config.loss = loss;
    config.surrogate = surrogate;
    config.spec = spec;
    config.l2 = l2;
    return config;
}

// Sparse count task with class-dependent informative features.
SparseExampleSet count_task(std::uint64_t seed, int n, int d, int informative) {
    SparseExampleSet set;
    set.n_features = d;
    set.n_classes = 2;
    set.class_names = {"pos", "neg"};
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng.uniform_int(2));
        SparseRow row;
        for (int j = 0; j < d; ++j) {
            double rate = 0.05;
            if (j < informative / 2)
                rate += label == 0 ? 0.9 : 0.05;
            else if (j < informative)
                rate += label == 1 ? 0.9 : 0.05;
            const double v = static_cast<double>(rng.poisson(rate));
            if (v != 0.0) row.push_back({j, v});
        }
        set.rows.push_back(row);
        set.labels.push_back(label);
    }
    return append_bias(set);
}

}  // namespace

TEST_CASE("q = 0 training equals uncorrupted training") {
    const SparseExampleSet set = test_utils::random_set(10, 30, 8, 0.6, test_utils::ValueKind::Counts, 2, true);
    const CorruptionSpec q0 = CorruptionSpec::uniform(CorruptionKind::Blankout, set.n_features, 0.0, set.bias_index);

    SUBCASE("exactly for the closed-form quadratic solve") {
        const LinearModel a = train(set, basic_config(LossKind::Quadratic, Surrogate::None, q0, 0.01));
        const LinearModel b =
            train(set, basic_config(LossKind::Quadratic, Surrogate::None, CorruptionSpec::none(), 0.01));
        CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("within optimizer tolerance for the iterative losses") {
        for (auto [loss, surrogate] :
             std::initializer_list<std::pair<LossKind, Surrogate>>{{LossKind::Exponential, Surrogate::None},
                                                                   {LossKind::Logistic, Surrogate::Jensen}}) {
            const LinearModel a = train(set, basic_config(loss, surrogate, q0, 0.01));
            const LinearModel b = train(set, basic_config(loss, surrogate, CorruptionSpec::none(), 0.01));
            CHECK(error_rate(a, set) == doctest::Approx(error_rate(b, set)).epsilon(1e-4));
            CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-3);
        }
    }
}

TEST_CASE("training is deterministic") {
    const SparseExampleSet set = count_task(21, 40, 12, 6);
    for (auto [loss, surrogate] : std::initializer_list<std::pair<LossKind, Surrogate>>{
             {LossKind::Quadratic, Surrogate::None},
             {LossKind::Exponential, Surrogate::None},
             {LossKind::Logistic, Surrogate::Jensen},
             {LossKind::Logistic, Surrogate::Variational}}) {
        const CorruptionSpec spec =
            CorruptionSpec::uniform(CorruptionKind::Blankout, set.n_features, 0.4, set.bias_index);
        TrainConfig config = basic_config(loss, surrogate, spec, 1e-3);
        config.seed = 7;
        const LinearModel a = train(set, config);
        const LinearModel b = train(set, config);
        CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.lambda == b.lambda);
        CHECK(a.fingerprint == b.fingerprint);
    }
}

TEST_CASE("poisson-jensen logistic trains on count data with no extra hyperparameter") {
    const SparseExampleSet set = count_task(31, 60, 16, 8);
    const CorruptionSpec spec = CorruptionSpec::uniform(CorruptionKind::Poisson, set.n_features, 0.0, set.bias_index);
    const LinearModel model = train(set, basic_config(LossKind::Logistic, Surrogate::Jensen, spec, 1e-4));
    CHECK(error_rate(model, set) < 0.2);
}

TEST_CASE("multi-class training routes") {
    const SparseExampleSet set = test_utils::random_set(41, 45, 6, 0.7, test_utils::ValueKind::Counts, 3, true);
    const CorruptionSpec spec =
        CorruptionSpec::uniform(CorruptionKind::Blankout, set.n_features, 0.3, set.bias_index);
    for (auto [loss, surrogate] : std::initializer_list<std::pair<LossKind, Surrogate>>{
             {LossKind::Quadratic, Surrogate::None},
             {LossKind::Exponential, Surrogate::None},
             {LossKind::Logistic, Surrogate::Jensen}}) {
        const LinearModel model = train(set, basic_config(loss, surrogate, spec, 1e-3));
        CHECK(model.weights.cols() == 3);
        CHECK(error_rate(model, set) < 0.5);
    }
    CHECK_THROWS_AS(train(set, basic_config(LossKind::Logistic, Surrogate::Variational, spec, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(train(set, basic_config(LossKind::Logistic, Surrogate::QuadraticApprox, spec, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("prediction conventions") {
    const SparseExampleSet set = test_utils::random_set(51, 10, 4, 0.8, test_utils::ValueKind::Reals, 2, true);
    LinearModel model;
    model.weights = MatrixXd::Zero(set.n_features, 1);
    model.class_names = set.class_names;
    model.bias_index = set.bias_index;
    model.loss = LossKind::Logistic;

    SUBCASE("zero weights predict the lowest class id everywhere") {
        const Prediction pred = predict(model, set);
        for (int id : pred.label_ids) CHECK(id == 0);
    }
    SUBCASE("positive score means the first-seen class") {
        model.weights(set.bias_index, 0) = 3.0;
        const Prediction pred = predict(model, set);
        for (int i = 0; i < set.n_examples(); ++i) {
            CHECK(pred.scores(i, 0) == 3.0);
            CHECK(pred.label_ids[i] == 0);
        }
        model.weights(set.bias_index, 0) = -3.0;
        for (int id : predict(model, set).label_ids) CHECK(id == 1);
    }
    SUBCASE("feature dimension mismatch is an error") {
        const SparseExampleSet wrong = test_utils::random_set(52, 5, 9, 0.8, test_utils::ValueKind::Reals, 2, true);
        CHECK_THROWS_WITH_AS(predict(model, wrong), doctest::Contains("dimension"), std::invalid_argument);
    }
    SUBCASE("marginalized prediction with no corruption equals the deterministic one") {
        model.weights = test_utils::random_vector(53, set.n_features, 0.8);
        model.spec = CorruptionSpec::none();
        const Prediction det = predict(model, set);
        const Prediction marg = predict_marginalized_set(model, set, 32, 99);
        for (int i = 0; i < set.n_examples(); ++i) CHECK(det.label_ids[i] == marg.label_ids[i]);
    }
}

TEST_CASE("cross-validation mechanics") {
    const SparseExampleSet set = count_task(61, 48, 10, 6);
    TrainConfig base = basic_config(
        LossKind::Logistic, Surrogate::Jensen,
        CorruptionSpec::uniform(CorruptionKind::Blankout, set.n_features, 0.0, set.bias_index), 0.0);

    SUBCASE("a one-point grid returns that point") {
        const CrossValResult result = cross_validate(set, base, {0.4}, {0.01}, 4, 3);
        CHECK(result.best.corruption_param == 0.4);
        CHECK(result.best.l2 == 0.01);
        CHECK(result.table.size() == 1);
    }
    SUBCASE("duplicate grid points tie-break to the first in order") {
        const CrossValResult result = cross_validate(set, base, {0.4, 0.4}, {0.01}, 4, 3);
        CHECK(result.table.size() == 2);
        CHECK(result.table[0].mean_error == result.table[1].mean_error);
        CHECK(result.best.corruption_param == 0.4);
    }
    SUBCASE("fold assignments are recorded and stratified") {
        const CrossValResult result = cross_validate(set, base, {0.2}, {0.0}, 4, 3);
        REQUIRE(static_cast<int>(result.fold_of_example.size()) == set.n_examples());
        int per_fold[4] = {0, 0, 0, 0};
        for (int f : result.fold_of_example) per_fold[f]++;
        for (int f = 0; f < 4; ++f) CHECK(per_fold[f] >= set.n_examples() / 4 - 2);
    }
    SUBCASE("a class that cannot reach two folds is an error") {
        SparseExampleSet tiny = set;
        // shrink class 1 to a single example
        SparseExampleSet reduced;
        reduced.n_features = tiny.n_features;
        reduced.n_classes = 2;
        reduced.bias_index = tiny.bias_index;
        reduced.class_names = tiny.class_names;
        bool kept_one = false;
        for (int i = 0; i < tiny.n_examples(); ++i) {
            if (tiny.labels[i] == 1) {
                if (kept_one) continue;
                kept_one = true;
            }
            reduced.rows.push_back(tiny.rows[i]);
            reduced.labels.push_back(tiny.labels[i]);
        }
        CHECK_THROWS_WITH_AS(cross_validate(reduced, base, {0.2}, {0.0}, 4, 3),
                             doctest::Contains("fewer folds"), std::runtime_error);
    }
}

TEST_CASE("folds = N cross-validation reproduces the closed-form LOO") {
    // Quadratic loss, no corruption, no l2: leaving an example out changes
    // exactly the rank-one terms, so the hat-matrix identity is exact.
    const SparseExampleSet set = test_utils::random_set(71, 14, 4, 0.95, test_utils::ValueKind::Reals);
    const VectorXd y = encode_labels(set, LabelScheme::PmOne);
    const double loo = leave_one_out(solve_quadratic(set, y, CorruptionSpec::none(), 0.0), y);

    TrainConfig base = basic_config(LossKind::Quadratic, Surrogate::None, CorruptionSpec::none(), 0.0);
    const CrossValResult cv = cross_validate(set, base, {0.0}, {0.0}, set.n_examples(), 5);
    CHECK(cv.table[0].mean_squared == doctest::Approx(loo).epsilon(1e-8));
}

TEST_CASE("feature deletion") {
    const SparseExampleSet set = test_utils::random_set(81, 50, 20, 0.8, test_utils::ValueKind::Reals, 2, true);
    SUBCASE("level 0 is the identity") {
        const SparseExampleSet out = delete_features(set, 0.0, 9);
        CHECK(out.n_nonzeros() == set.n_nonzeros());
    }
    SUBCASE("bias survives any level") {
        const SparseExampleSet out = delete_features(set, 0.97, 9);
        for (int i = 0; i < out.n_examples(); ++i) {
            bool has_bias = false;
            for (const auto& f : out.rows[i]) has_bias |= f.index == set.bias_index;
            CHECK(has_bias);
        }
    }
    SUBCASE("deletion rate is roughly the level") {
        const SparseExampleSet out = delete_features(set, 0.5, 9);
        const double total = static_cast<double>(set.n_nonzeros() - set.n_examples());
        const double kept = static_cast<double>(out.n_nonzeros() - out.n_examples());
        CHECK(std::abs(kept / total - 0.5) < 4.0 * std::sqrt(0.25 / total));
    }
}

TEST_CASE("nightmare evaluation") {
    const SparseExampleSet train_set = count_task(91, 80, 14, 8);
    const SparseExampleSet test_set = count_task(92, 300, 14, 8);
    TrainConfig base = basic_config(
        LossKind::Quadratic, Surrogate::None,
        CorruptionSpec::uniform(CorruptionKind::Blankout, train_set.n_features, 0.0, train_set.bias_index),
        1e-3);

    SUBCASE("level zero reports the plain test error") {
        const LinearModel model = train(train_set, base);
        const EvalReport report = nightmare_eval(train_set, test_set, base, {}, {}, {0.0}, 17, false);
        CHECK(report.levels[0].error == doctest::Approx(error_rate(model, test_set)).epsilon(1e-12));
        CHECK(report.confusion.sum() == test_set.n_examples());
        // the error rate and the confusion counts tell one story
        const double off_diagonal = report.confusion.sum() - report.confusion.diagonal().sum();
        CHECK(report.error == doctest::Approx(off_diagonal / test_set.n_examples()).epsilon(1e-12));
    }
    SUBCASE("deterministic per seed") {
        const EvalReport a = nightmare_eval(train_set, test_set, base, {0.0, 0.5}, {1e-3}, {0.0, 0.4}, 17, true);
        const EvalReport b = nightmare_eval(train_set, test_set, base, {0.0, 0.5}, {1e-3}, {0.0, 0.4}, 17, true);
        REQUIRE(a.levels.size() == b.levels.size());
        for (std::size_t i = 0; i < a.levels.size(); ++i) {
            CHECK(a.levels[i].error == b.levels[i].error);
            CHECK(a.levels[i].chosen_param == b.levels[i].chosen_param);
        }
    }
    SUBCASE("unsorted levels are rejected") {
        CHECK_THROWS_AS(nightmare_eval(train_set, test_set, base, {}, {}, {0.5, 0.0}, 17, false),
                        std::invalid_argument);
    }
}

TEST_CASE("near-total deletion approaches the majority baseline") {
    // Balanced classes: with deletion 0.999 essentially only the bias
    // survives, so every prediction collapses to one class and the error
    // approaches the 0.5 baseline.
    std::vector<double> errors;
    for (int seed = 0; seed < 10; ++seed) {
        SparseExampleSet train_set;
        train_set.n_features = 8;
        train_set.n_classes = 2;
        train_set.class_names = {"a", "b"};
        Rng rng(500 + seed);
        for (int i = 0; i < 120; ++i) {
            const int label = i % 2;
            SparseRow row;
            for (int j = 0; j < 8; ++j)
                row.push_back({j, rng.normal(label == 0 ? 1.0 : -1.0, 0.5)});
            train_set.rows.push_back(row);
            train_set.labels.push_back(label);
        }
        train_set = append_bias(train_set);
        SparseExampleSet test_set = train_set;

        TrainConfig base = basic_config(LossKind::Logistic, Surrogate::Jensen, CorruptionSpec::none(), 1e-3);
        const EvalReport report =
            nightmare_eval(train_set, test_set, base, {}, {}, {0.999}, 600 + seed, false);
        errors.push_back(report.levels[0].error);
    }
    double mean = 0.0;
    for (double e : errors) mean += e;
    CHECK(std::abs(mean / errors.size() - 0.5) < 0.05);
}

TEST_CASE("model serialization") {
    const SparseExampleSet set = count_task(101, 35, 9, 4);
    TrainConfig config = basic_config(
        LossKind::Logistic, Surrogate::Variational,
        CorruptionSpec::uniform(CorruptionKind::Blankout, set.n_features, 0.35, set.bias_index), 1e-3);
    config.seed = 11;
    const LinearModel model = train(set, config);

    SUBCASE("round trip reproduces predictions bit-identically") {
        const std::string text = model_to_string(model);
        const LinearModel loaded = model_from_string(text);
        CHECK(loaded.fingerprint == model.fingerprint);
        CHECK(loaded.lambda == model.lambda);
        CHECK(loaded.spec.kind == model.spec.kind);
        CHECK((loaded.weights - model.weights).cwiseAbs().maxCoeff() == 0.0);
        const Prediction a = predict(model, set);
        const Prediction b = predict(loaded, set);
        for (int i = 0; i < set.n_examples(); ++i) {
            CHECK(a.label_ids[i] == b.label_ids[i]);
            CHECK(a.scores(i, 0) == b.scores(i, 0));
        }
        CHECK(model_to_string(loaded) == text);
    }
    SUBCASE("a tampered byte fails the checksum") {
        std::string text = model_to_string(model);
        auto pos = text.find("weights ");
        REQUIRE(pos != std::string::npos);
        pos = text.find('\n', pos) + 1;
        while (text[pos] == '-' || text[pos] == '0' || text[pos] == '.') ++pos;  // find a flippable digit
        REQUIRE(std::isdigit(static_cast<unsigned char>(text[pos])));
        text[pos] = text[pos] == '9' ? '1' : '9';
        CHECK_THROWS_WITH_AS(model_from_string(text), doctest::Contains("checksum"), std::runtime_error);
    }
    SUBCASE("a missing section is reported by name") {
        std::string text = model_to_string(model);
        // drop the corruption line and re-checksum so only the section is at fault
        const auto pos = text.find("corruption ");
        const auto end = text.find('\n', pos);
        text.erase(pos, end - pos + 1);
        const auto mark = text.rfind("checksum ");
        text.erase(mark);
        uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : text) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        char line[32];
        std::snprintf(line, sizeof(line), "checksum %016llx", static_cast<unsigned long long>(h));
        text += line;
        text += "\n";
        CHECK_THROWS_WITH_AS(model_from_string(text), doctest::Contains("corruption"), std::runtime_error);
    }
}

TEST_CASE("count task: corrupted training beats the plain baseline under deletion") {
    // Sparse token counts with class-synonym redundancy (each example
    // expresses only a few of its class's informative tokens), evaluated at
    // 50% deletion with transductive selection: blankout-MCF logistic
    // against plain l2 logistic, medians over ten seeds.
    auto token_task = [](std::uint64_t seed, int n, int d, int pool, double len, double p_inf) {
        SparseExampleSet s;
        s.n_features = d;
        s.n_classes = 2;
        s.class_names = {"pos", "neg"};
        Rng rng(seed);
        for (int i = 0; i < n; ++i) {
            const int label = static_cast<int>(rng.uniform_int(2));
            std::vector<double> counts(d, 0.0);
            const int tokens = static_cast<int>(rng.poisson(len)) + 1;
            for (int t = 0; t < tokens; ++t) {
                if (rng.uniform() < p_inf) {
                    const int j = static_cast<int>(rng.uniform_int(pool));
                    counts[label == 0 ? j : pool + j] += 1.0;
                } else {
                    counts[2 * pool + rng.uniform_int(d - 2 * pool)] += 1.0;
                }
            }
            SparseRow row;
            for (int j = 0; j < d; ++j)
                if (counts[j] != 0.0) row.push_back({j, counts[j]});
            s.rows.push_back(row);
            s.labels.push_back(label);
        }
        return append_bias(s);
    };

    std::vector<double> mcf_errors, plain_errors;
    for (int seed = 0; seed < 10; ++seed) {
        const SparseExampleSet train_set = token_task(700 + seed, 150, 80, 15, 8.0, 0.5);
        const SparseExampleSet test_set = token_task(800 + seed, 700, 80, 15, 8.0, 0.5);

        TrainConfig mcf_base = basic_config(
            LossKind::Logistic, Surrogate::Jensen,
            CorruptionSpec::uniform(CorruptionKind::Blankout, train_set.n_features, 0.0, train_set.bias_index),
            0.0);
        const EvalReport mcf_report = nightmare_eval(train_set, test_set, mcf_base, {0.3, 0.6, 0.8},
                                                     {0.0, 1e-3}, {0.5}, 900 + seed, true);
        mcf_errors.push_back(mcf_report.levels[0].error);

        TrainConfig plain_base =
            basic_config(LossKind::Logistic, Surrogate::Jensen, CorruptionSpec::none(), 0.0);
        const EvalReport plain_report =
            nightmare_eval(train_set, test_set, plain_base, {0.0}, {1e-4, 1e-2, 1.0}, {0.5}, 900 + seed, true);
        plain_errors.push_back(plain_report.levels[0].error);
    }
    CHECK(test_utils::median(mcf_errors) < test_utils::median(plain_errors));
}
