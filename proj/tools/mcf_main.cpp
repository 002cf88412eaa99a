#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcf/explicit_corruption.hpp"
#include "mcf/harness.hpp"
#include "mcf/quadratic.hpp"

namespace {

struct CorruptionArgs {
    std::string kind = "none";
    std::vector<double> q;
    std::vector<double> sigma;
    std::vector<double> lambda_laplace;
    int categories = 0;

    void attach(CLI::App* cmd, bool list_valued) {
        cmd->add_option("--corruption", kind, "none|dropout|blankout|gaussian|laplace|poisson|multinomial")
            ->default_val("none");
        const char* many = list_valued ? " (comma-separated list accepted)" : "";
        cmd->add_option("--q", q, std::string("corruption probability for dropout/blankout/multinomial") + many)
            ->delimiter(',');
        cmd->add_option("--sigma", sigma, std::string("gaussian noise stddev") + many)->delimiter(',');
        cmd->add_option("--lambda-laplace", lambda_laplace, std::string("laplace noise scale") + many)
            ->delimiter(',');
        cmd->add_option("--categories", categories, "block width K for multinomial corruption");
    }

    mcf::CorruptionKind parsed_kind() const { return mcf::corruption_kind_from_name(kind); }

    const std::vector<double>& param_list() const {
        static const std::vector<double> zero{0.0};
        switch (parsed_kind()) {
            case mcf::CorruptionKind::Dropout:
            case mcf::CorruptionKind::Blankout:
            case mcf::CorruptionKind::Multinomial: return q.empty() ? zero : q;
            case mcf::CorruptionKind::Gaussian: return sigma.empty() ? zero : sigma;
            case mcf::CorruptionKind::Laplace: return lambda_laplace.empty() ? zero : lambda_laplace;
            default: return zero;
        }
    }

    mcf::CorruptionSpec spec(int n_features, int bias_index, double param) const {
        mcf::CorruptionSpec s = mcf::CorruptionSpec::uniform(parsed_kind(), n_features, param, bias_index);
        s.n_categories = categories;
        s.validate(n_features);
        return s;
    }
};

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << body;
}

int run(int argc, char** argv) {
    CLI::App app{"Linear predictors trained on analytically corrupted features"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "fit a model and write it to disk");
    std::string data_path, out_path = "model.txt", loss = "logistic", surrogate = "jensen";
    double l2 = 0.0;
    std::uint64_t seed = 0;
    int max_iters = 1000;
    bool no_bias = false;
    CorruptionArgs train_corruption;
    train_cmd->add_option("--data", data_path, "training data (svmlight)")->required();
    train_cmd->add_option("--out", out_path, "output model path")->default_val("model.txt");
    train_cmd->add_option("--loss", loss, "quadratic|exponential|logistic")->default_val("logistic");
    train_cmd->add_option("--surrogate", surrogate, "quadratic_approx|jensen|variational")->default_val("jensen");
    train_cmd->add_option("--l2", l2, "l2 penalty (bias excluded)");
    train_cmd->add_option("--seed", seed, "random seed");
    train_cmd->add_option("--max-iters", max_iters, "optimizer iteration cap");
    train_cmd->add_flag("--no-bias", no_bias, "do not append the bias feature");
    train_corruption.attach(train_cmd, false);

    // ---- predict ----
    auto* predict_cmd = app.add_subcommand("predict", "predict labels for a data set");
    std::string model_path, csv_path;
    bool marginalized = false;
    int mc_samples = 100;
    predict_cmd->add_option("--model", model_path, "model file")->required();
    predict_cmd->add_option("--data", data_path, "data to predict (svmlight)")->required();
    predict_cmd->add_option("--csv", csv_path, "write predictions as CSV");
    predict_cmd->add_flag("--marginalized", marginalized, "average predictions over corrupted copies");
    predict_cmd->add_option("--mc-samples", mc_samples, "corrupted copies per example when --marginalized");
    predict_cmd->add_option("--seed", seed, "random seed");

    // ---- crossval ----
    auto* cv_cmd = app.add_subcommand("crossval", "grid search by stratified cross-validation");
    std::vector<double> l2_list{0.0};
    int folds = 5;
    CorruptionArgs cv_corruption;
    cv_cmd->add_option("--data", data_path, "training data (svmlight)")->required();
    cv_cmd->add_option("--loss", loss, "quadratic|exponential|logistic")->default_val("logistic");
    cv_cmd->add_option("--surrogate", surrogate, "quadratic_approx|jensen|variational")->default_val("jensen");
    cv_cmd->add_option("--l2", l2_list, "l2 grid")->delimiter(',');
    cv_cmd->add_option("--folds", folds, "number of folds")->default_val(5);
    cv_cmd->add_option("--seed", seed, "random seed");
    cv_cmd->add_option("--max-iters", max_iters, "optimizer iteration cap");
    cv_cmd->add_option("--csv", csv_path, "write the result table as CSV");
    cv_cmd->add_flag("--no-bias", no_bias, "do not append the bias feature");
    cv_corruption.attach(cv_cmd, true);

    // ---- nightmare-eval ----
    auto* nm_cmd = app.add_subcommand("nightmare-eval", "test-time feature deletion robustness");
    std::string train_path, test_path;
    std::vector<double> levels{0.0};
    bool transductive = false;
    CorruptionArgs nm_corruption;
    nm_cmd->add_option("--train", train_path, "training data (svmlight)")->required();
    nm_cmd->add_option("--test", test_path, "test data (svmlight)")->required();
    nm_cmd->add_option("--loss", loss, "quadratic|exponential|logistic")->default_val("logistic");
    nm_cmd->add_option("--surrogate", surrogate, "quadratic_approx|jensen|variational")->default_val("jensen");
    nm_cmd->add_option("--l2", l2_list, "l2 grid")->delimiter(',');
    nm_cmd->add_option("--levels", levels, "deletion levels in [0,1), ascending")->delimiter(',');
    nm_cmd->add_option("--seed", seed, "random seed");
    nm_cmd->add_option("--max-iters", max_iters, "optimizer iteration cap");
    nm_cmd->add_option("--csv", csv_path, "write per-level errors as CSV");
    nm_cmd->add_flag("--transductive", transductive, "re-select hyperparameters per deletion level");
    nm_cmd->add_flag("--no-bias", no_bias, "do not append the bias feature");
    nm_corruption.attach(nm_cmd, true);

    // ---- corrupt ----
    auto* corrupt_cmd = app.add_subcommand("corrupt", "write explicitly corrupted replicas of a data set");
    int replicates = 1;
    CorruptionArgs corrupt_corruption;
    corrupt_cmd->add_option("--data", data_path, "input data (svmlight)")->required();
    corrupt_cmd->add_option("--out", out_path, "output path")->required();
    corrupt_cmd->add_option("--replicates", replicates, "corrupted copies per example")->default_val(1);
    corrupt_cmd->add_option("--seed", seed, "random seed");
    corrupt_corruption.attach(corrupt_cmd, false);

    // ---- loo ----
    auto* loo_cmd = app.add_subcommand("loo", "closed-form leave-one-out error of the quadratic loss");
    CorruptionArgs loo_corruption;
    loo_cmd->add_option("--data", data_path, "training data (svmlight)")->required();
    loo_cmd->add_option("--l2", l2, "l2 penalty (bias excluded)");
    loo_cmd->add_flag("--no-bias", no_bias, "do not append the bias feature");
    loo_corruption.attach(loo_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    if (train_cmd->parsed()) {
        mcf::SparseExampleSet set = mcf::load_svmlight(data_path);
        if (!no_bias) set = mcf::append_bias(set);
        mcf::TrainConfig config;
        config.loss = mcf::loss_kind_from_name(loss);
        config.surrogate = mcf::surrogate_from_name(surrogate);
        config.spec = train_corruption.spec(set.n_features, set.bias_index, train_corruption.param_list()[0]);
        config.l2 = l2;
        config.seed = seed;
        config.optimizer.max_iterations = max_iters;
        const mcf::LinearModel model = mcf::train(set, config);
        mcf::save_model(model, out_path);
        std::printf("trained %s/%s on %d examples (D=%d, K=%d); training error %.4f\n",
                    loss.c_str(), mcf::loss_kind_from_name(loss) == mcf::LossKind::Logistic ? surrogate.c_str() : "-",
                    set.n_examples(), set.n_features, set.n_classes, mcf::error_rate(model, set));
        std::printf("model written to %s\n", out_path.c_str());
        return 0;
    }

    if (predict_cmd->parsed()) {
        const mcf::LinearModel model = mcf::load_model(model_path);
        mcf::SparseExampleSet set = mcf::load_svmlight(data_path, model.bias_index >= 0 ? model.n_features() - 1
                                                                                        : model.n_features());
        if (model.bias_index >= 0) set = mcf::append_bias(set);
        const mcf::Prediction pred = marginalized
                                         ? mcf::predict_marginalized_set(model, set, mc_samples, seed)
                                         : mcf::predict(model, set);
        std::ostringstream csv;
        csv << "example,predicted_label";
        for (int c = 0; c < pred.scores.cols(); ++c) csv << ",score_" << c;
        csv << '\n';
        for (int i = 0; i < set.n_examples(); ++i) {
            csv << i << ',' << model.class_names.at(pred.label_ids[i]);
            for (int c = 0; c < pred.scores.cols(); ++c) {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", pred.scores(i, c));
                csv << ',' << buf;
            }
            csv << '\n';
        }
        if (!csv_path.empty()) write_text_file(csv_path, csv.str());
        // Report accuracy when label tokens match the model's classes.
        bool labels_known = set.n_classes == static_cast<int>(model.class_names.size());
        for (int c = 0; labels_known && c < set.n_classes; ++c)
            labels_known = set.class_names[c] == model.class_names[c];
        if (labels_known) {
            int errors = 0;
            for (int i = 0; i < set.n_examples(); ++i) errors += pred.label_ids[i] != set.labels[i];
            std::printf("error rate %.4f (%d/%d)\n", static_cast<double>(errors) / set.n_examples(), errors,
                        set.n_examples());
        } else {
            std::printf("predicted %d examples\n", set.n_examples());
        }
        if (csv_path.empty() && !labels_known) std::fputs(csv.str().c_str(), stdout);
        return 0;
    }

    if (cv_cmd->parsed()) {
        mcf::SparseExampleSet set = mcf::load_svmlight(data_path);
        if (!no_bias) set = mcf::append_bias(set);
        mcf::TrainConfig base;
        base.loss = mcf::loss_kind_from_name(loss);
        base.surrogate = mcf::surrogate_from_name(surrogate);
        base.spec = cv_corruption.spec(set.n_features, set.bias_index, cv_corruption.param_list()[0]);
        base.seed = seed;
        base.optimizer.max_iterations = max_iters;
        const mcf::CrossValResult result =
            mcf::cross_validate(set, base, cv_corruption.param_list(), l2_list, folds, seed);
        std::printf("%12s %12s %12s\n", "param", "l2", "error");
        for (const auto& p : result.table) std::printf("%12g %12g %12.4f\n", p.corruption_param, p.l2, p.mean_error);
        std::printf("best: param=%g l2=%g error=%.4f\n", result.best.corruption_param, result.best.l2,
                    result.best.mean_error);
        if (!csv_path.empty()) {
            std::ostringstream csv;
            csv << "record,param,l2,mean_error,mean_squared\n";
            for (const auto& p : result.table)
                csv << "grid," << p.corruption_param << ',' << p.l2 << ',' << p.mean_error << ','
                    << p.mean_squared << '\n';
            for (std::size_t i = 0; i < result.fold_of_example.size(); ++i)
                csv << "fold," << i << ',' << result.fold_of_example[i] << ",,\n";
            write_text_file(csv_path, csv.str());
        }
        return 0;
    }

    if (nm_cmd->parsed()) {
        mcf::SparseExampleSet train_set = mcf::load_svmlight(train_path);
        if (!no_bias) train_set = mcf::append_bias(train_set);
        mcf::SparseExampleSet test_set = mcf::load_svmlight(test_path, no_bias ? train_set.n_features
                                                                               : train_set.n_features - 1);
        if (!no_bias) test_set = mcf::append_bias(test_set);
        mcf::TrainConfig base;
        base.loss = mcf::loss_kind_from_name(loss);
        base.surrogate = mcf::surrogate_from_name(surrogate);
        base.spec = nm_corruption.spec(train_set.n_features, train_set.bias_index, nm_corruption.param_list()[0]);
        base.l2 = l2_list[0];
        base.seed = seed;
        base.optimizer.max_iterations = max_iters;
        const mcf::EvalReport report = mcf::nightmare_eval(train_set, test_set, base, nm_corruption.param_list(),
                                                           l2_list, levels, seed, transductive);
        std::printf("%8s %10s %10s %10s\n", "level", "error", "param", "l2");
        for (const auto& entry : report.levels)
            std::printf("%8.3f %10.4f %10g %10g\n", entry.level, entry.error, entry.chosen_param, entry.chosen_l2);
        if (!csv_path.empty()) {
            std::ostringstream csv;
            csv << "level,error,chosen_param,chosen_l2\n";
            for (const auto& entry : report.levels)
                csv << entry.level << ',' << entry.error << ',' << entry.chosen_param << ',' << entry.chosen_l2
                    << '\n';
            write_text_file(csv_path, csv.str());
        }
        return 0;
    }

    if (corrupt_cmd->parsed()) {
        const mcf::SparseExampleSet set = mcf::load_svmlight(data_path);
        const mcf::CorruptionSpec spec =
            corrupt_corruption.spec(set.n_features, set.bias_index, corrupt_corruption.param_list()[0]);
        const mcf::SparseExampleSet corrupted = mcf::replicate(set, spec, replicates, seed);
        mcf::write_svmlight(corrupted, out_path);
        std::printf("wrote %d corrupted examples (%s, %d replicas) to %s\n", corrupted.n_examples(),
                    corrupt_corruption.kind.c_str(), replicates, out_path.c_str());
        return 0;
    }

    if (loo_cmd->parsed()) {
        mcf::SparseExampleSet set = mcf::load_svmlight(data_path);
        if (!no_bias) set = mcf::append_bias(set);
        const mcf::CorruptionSpec spec =
            loo_corruption.spec(set.n_features, set.bias_index, loo_corruption.param_list()[0]);
        const Eigen::VectorXd y = mcf::encode_labels(set, mcf::LabelScheme::PmOne);
        const mcf::QuadSolveResult solved = mcf::solve_quadratic(set, y, spec, l2);
        std::printf("leave-one-out squared error estimate: %.10g\n", mcf::leave_one_out(solved, y));
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
