#include "mcf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace mcf {

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
    throw std::runtime_error("svmlight parse error at line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::size_t SparseExampleSet::n_nonzeros() const {
    std::size_t n = 0;
    for (const auto& row : rows) n += row.size();
    return n;
}

SparseExampleSet parse_svmlight(const std::string& text, int expected_features) {
    SparseExampleSet set;
    set.n_features = expected_features;
    std::unordered_map<std::string, int> class_ids;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream tokens(line);
        std::string label;
        if (!(tokens >> label)) continue;  // blank or comment-only line

        auto [it, inserted] = class_ids.try_emplace(label, static_cast<int>(class_ids.size()));
        if (inserted) set.class_names.push_back(label);
        set.labels.push_back(it->second);

        SparseRow row;
        std::string tok;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                parse_fail(line_no, "expected <index>:<value>, got '" + tok + "'");
            std::size_t pos = 0;
            long idx = 0;
            double val = 0.0;
            try {
                idx = std::stol(tok.substr(0, colon), &pos);
                if (pos != colon) throw std::invalid_argument(tok);
                val = std::stod(tok.substr(colon + 1), &pos);
                if (pos != tok.size() - colon - 1) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                parse_fail(line_no, "malformed feature '" + tok + "'");
            }
            if (idx < 1) parse_fail(line_no, "feature index must be >= 1, got " + std::to_string(idx));
            if (!std::isfinite(val)) parse_fail(line_no, "non-finite value in '" + tok + "'");
            row.push_back({static_cast<int>(idx - 1), val});
        }
        std::sort(row.begin(), row.end(), [](const Feature& a, const Feature& b) { return a.index < b.index; });
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i].index == row[i - 1].index)
                parse_fail(line_no, "duplicate feature index " + std::to_string(row[i].index + 1));
        if (!row.empty()) set.n_features = std::max(set.n_features, row.back().index + 1);
        set.rows.push_back(std::move(row));
    }
    set.n_classes = static_cast<int>(set.class_names.size());
    return set;
}

SparseExampleSet load_svmlight(const std::string& path, int expected_features) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open data file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_svmlight(buf.str(), expected_features);
}

std::string to_svmlight(const SparseExampleSet& set) {
    std::string out;
    for (int n = 0; n < set.n_examples(); ++n) {
        out += set.class_names.at(set.labels[n]);
        for (const auto& [index, value] : set.rows[n]) {
            out += ' ';
            out += std::to_string(index + 1);
            out += ':';
            out += format_value(value);
        }
        out += '\n';
    }
    return out;
}

void write_svmlight(const SparseExampleSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write data file: " + path);
    out << to_svmlight(set);
}

Eigen::MatrixXd encode_labels(const SparseExampleSet& set, LabelScheme scheme) {
    const int n = set.n_examples();
    const int k = set.n_classes;
    switch (scheme) {
        case LabelScheme::PmOne:
        case LabelScheme::ZeroOne: {
            if (k != 2)
                throw std::invalid_argument("binary label scheme requires exactly 2 classes, data has " +
                                            std::to_string(k));
            Eigen::MatrixXd y(n, 1);
            for (int i = 0; i < n; ++i) {
                const bool first = set.labels[i] == 0;
                y(i, 0) = scheme == LabelScheme::PmOne ? (first ? 1.0 : -1.0) : (first ? 1.0 : 0.0);
            }
            return y;
        }
        case LabelScheme::SimplexMulticlass: {
            if (k < 2) throw std::invalid_argument("simplex encoding requires K >= 2");
            Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, k, -1.0 / (k - 1));
            for (int i = 0; i < n; ++i) y(i, set.labels[i]) = 1.0;
            return y;
        }
        case LabelScheme::OneHot: {
            if (k < 2) throw std::invalid_argument("one-hot encoding requires K >= 2");
            Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
            for (int i = 0; i < n; ++i) y(i, set.labels[i]) = 1.0;
            return y;
        }
    }
    throw std::logic_error("unreachable");
}

SparseExampleSet append_bias(const SparseExampleSet& set) {
    if (set.bias_index >= 0) throw std::invalid_argument("bias feature already present");
    SparseExampleSet out = set;
    out.bias_index = out.n_features;
    out.n_features += 1;
    for (auto& row : out.rows) row.push_back({out.bias_index, 1.0});
    return out;
}

double sparse_dot(const SparseRow& row, const Eigen::VectorXd& w) {
    double s = 0.0;
    for (const auto& [index, value] : row) s += value * w[index];
    return s;
}

}  // namespace mcf
