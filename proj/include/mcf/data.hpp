#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace mcf {

struct Feature {
    int index;
    double value;
};

// One example: (index, value) pairs with strictly increasing indices.
using SparseRow = std::vector<Feature>;

// Row-sparse design matrix with dense class ids in [0, K). Class ids are
// assigned in first-seen order; `class_names` maps them back to the label
// tokens of the source file. Immutable after load by convention.
struct SparseExampleSet {
    int n_features = 0;
    int n_classes = 0;
    int bias_index = -1;  // -1 when no bias column has been appended
    std::vector<SparseRow> rows;
    std::vector<int> labels;
    std::vector<std::string> class_names;

    int n_examples() const { return static_cast<int>(rows.size()); }
    std::size_t n_nonzeros() const;
};

enum class LabelScheme {
    PmOne,              // y in {-1,+1}, K = 2, class id 0 -> +1
    ZeroOne,            // y in {0,1},  K = 2, class id 0 -> 1
    SimplexMulticlass,  // y_k in {1, -1/(K-1)}, rows sum to 0
    OneHot,             // y in {0,1}^K, rows sum to 1
};

// svmlight/libsvm text format: `<label> <idx>:<val> ...`, 1-based indices,
// `#` starts a comment. Internal indices are 0-based. Out-of-order indices
// are re-sorted; duplicates, non-finite values and malformed tokens are
// rejected with the offending line number.
SparseExampleSet load_svmlight(const std::string& path, int expected_features = 0);
SparseExampleSet parse_svmlight(const std::string& text, int expected_features = 0);

// Canonical serialization: sorted indices, 1-based, values with 17
// significant digits, so write(load(f)) is byte-stable.
std::string to_svmlight(const SparseExampleSet& set);
void write_svmlight(const SparseExampleSet& set, const std::string& path);

// N x K label matrix (N x 1 for the binary schemes).
Eigen::MatrixXd encode_labels(const SparseExampleSet& set, LabelScheme scheme);

// Appends a constant-1 feature and records its index so that corruption and
// regularization skip it. Refuses to append twice.
SparseExampleSet append_bias(const SparseExampleSet& set);

double sparse_dot(const SparseRow& row, const Eigen::VectorXd& w);

}  // namespace mcf
