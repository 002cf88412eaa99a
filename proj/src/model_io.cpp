#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mcf/harness.hpp"

namespace mcf {

namespace {

constexpr const char* kMagic = "mcf-model 1";

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void missing(const std::string& section) {
    throw std::runtime_error("model file missing section: " + section);
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Next line must start with `key`; returns the remainder after the key.
    std::string expect(const std::string& key) {
        std::string line;
        if (!std::getline(in_, line)) missing(key);
        if (line.rfind(key, 0) != 0) missing(key);
        std::string rest = line.substr(key.size());
        if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        return rest;
    }

    std::string line_or_fail(const std::string& section) {
        std::string line;
        if (!std::getline(in_, line)) missing(section);
        return line;
    }

private:
    std::istream& in_;
};

}  // namespace

std::string model_to_string(const LinearModel& model) {
    std::ostringstream out;
    out << kMagic << '\n';
    out << "loss " << loss_kind_name(model.loss) << '\n';
    out << "surrogate " << surrogate_name(model.surrogate) << '\n';
    out << "lambda " << fmt17(model.lambda) << '\n';
    out << "l2 " << fmt17(model.l2) << '\n';
    out << "seed " << model.seed << '\n';
    out << "fingerprint " << model.fingerprint << '\n';
    out << "classes " << model.class_names.size() << '\n';
    for (const auto& name : model.class_names) out << "class " << name << '\n';
    out << "bias_index " << model.bias_index << '\n';
    out << "corruption " << corruption_kind_name(model.spec.kind) << '\n';
    out << "n_categories " << model.spec.n_categories << '\n';
    out << "params " << model.spec.params.size() << '\n';
    for (int d = 0; d < model.spec.params.size(); ++d) out << fmt17(model.spec.params[d]) << '\n';
    out << "mask " << model.spec.corrupt_mask.size() << '\n';
    if (!model.spec.corrupt_mask.empty()) {
        for (auto bit : model.spec.corrupt_mask) out << (bit ? '1' : '0');
        out << '\n';
    }
    out << "weights " << model.weights.rows() << ' ' << model.weights.cols() << '\n';
    for (int d = 0; d < model.weights.rows(); ++d) {
        for (int c = 0; c < model.weights.cols(); ++c) {
            if (c) out << ' ';
            out << fmt17(model.weights(d, c));
        }
        out << '\n';
    }
    std::string payload = out.str();
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "checksum %016llx", static_cast<unsigned long long>(fnv1a(payload)));
    return payload + checksum + "\n";
}

void save_model(const LinearModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model_to_string(model);
}

LinearModel model_from_string(const std::string& text) {
    // Verify the checksum against everything above it before parsing.
    const auto mark = text.rfind("checksum ");
    if (mark == std::string::npos) missing("checksum");
    const std::string payload = text.substr(0, mark);
    std::string recorded = text.substr(mark + 9);
    while (!recorded.empty() && (recorded.back() == '\n' || recorded.back() == '\r')) recorded.pop_back();
    char expected[20];
    std::snprintf(expected, sizeof(expected), "%016llx", static_cast<unsigned long long>(fnv1a(payload)));
    if (recorded != expected) throw std::runtime_error("model file checksum mismatch");

    std::istringstream in(payload);
    Reader reader(in);
    if (reader.line_or_fail("header") != kMagic) throw std::runtime_error("unsupported model file version");

    LinearModel model;
    model.loss = loss_kind_from_name(reader.expect("loss"));
    model.surrogate = surrogate_from_name(reader.expect("surrogate"));
    model.lambda = std::stod(reader.expect("lambda"));
    model.l2 = std::stod(reader.expect("l2"));
    model.seed = std::stoull(reader.expect("seed"));
    model.fingerprint = reader.expect("fingerprint");
    const int n_classes = std::stoi(reader.expect("classes"));
    for (int c = 0; c < n_classes; ++c) model.class_names.push_back(reader.expect("class"));
    model.bias_index = std::stoi(reader.expect("bias_index"));
    model.spec.kind = corruption_kind_from_name(reader.expect("corruption"));
    model.spec.n_categories = std::stoi(reader.expect("n_categories"));
    const int n_params = std::stoi(reader.expect("params"));
    model.spec.params.resize(n_params);
    for (int d = 0; d < n_params; ++d) model.spec.params[d] = std::stod(reader.line_or_fail("params"));
    const int n_mask = std::stoi(reader.expect("mask"));
    if (n_mask > 0) {
        const std::string bits = reader.line_or_fail("mask");
        if (static_cast<int>(bits.size()) < n_mask) missing("mask");
        model.spec.corrupt_mask.resize(n_mask);
        for (int d = 0; d < n_mask; ++d) model.spec.corrupt_mask[d] = bits[d] == '1';
    }
    std::istringstream dims(reader.expect("weights"));
    int rows = 0, cols = 0;
    if (!(dims >> rows >> cols) || rows < 0 || cols < 1) missing("weights");
    model.weights.resize(rows, cols);
    for (int d = 0; d < rows; ++d) {
        std::istringstream row(reader.line_or_fail("weights"));
        for (int c = 0; c < cols; ++c)
            if (!(row >> model.weights(d, c))) missing("weights");
    }
    return model;
}

LinearModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_string(buf.str());
}

}  // namespace mcf
