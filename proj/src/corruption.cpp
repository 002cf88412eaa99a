#include "mcf/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcf/rng.hpp"

namespace mcf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(q + (1-q) e^a), evaluated on the side of the sign of `a` so neither
// branch can overflow. Exact 0 at a = 0.
double log_mix(double q, double a) {
    if (a == 0.0) return 0.0;
    if (a <= 0.0) return std::log(q + (1.0 - q) * std::exp(a));
    return a + std::log(q * std::exp(-a) + (1.0 - q));
}

// d/da log(q + (1-q) e^a) = (1-q) e^a / (q + (1-q) e^a), in (0, 1].
double log_mix_slope(double q, double a) {
    if (a <= 0.0) {
        const double e = std::exp(a);
        return (1.0 - q) * e / (q + (1.0 - q) * e);
    }
    return (1.0 - q) / (q * std::exp(-a) + (1.0 - q));
}

[[noreturn]] void no_multinomial_scalar() {
    throw std::invalid_argument(
        "multinomial corruption couples slots within a block; use the *_block interface");
}

void check_poisson_domain(double x) {
    if (x < 0.0) throw std::domain_error("poisson corruption requires nonnegative values, got " + std::to_string(x));
}

}  // namespace

const char* corruption_kind_name(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::None: return "none";
        case CorruptionKind::Dropout: return "dropout";
        case CorruptionKind::Blankout: return "blankout";
        case CorruptionKind::Gaussian: return "gaussian";
        case CorruptionKind::Laplace: return "laplace";
        case CorruptionKind::Poisson: return "poisson";
        case CorruptionKind::Multinomial: return "multinomial";
    }
    return "?";
}

CorruptionKind corruption_kind_from_name(const std::string& name) {
    for (CorruptionKind kind :
         {CorruptionKind::None, CorruptionKind::Dropout, CorruptionKind::Blankout, CorruptionKind::Gaussian,
          CorruptionKind::Laplace, CorruptionKind::Poisson, CorruptionKind::Multinomial}) {
        if (name == corruption_kind_name(kind)) return kind;
    }
    throw std::invalid_argument("unknown corruption kind: " + name);
}

CorruptionSpec CorruptionSpec::uniform(CorruptionKind kind, int n_features, double param, int excluded) {
    CorruptionSpec spec;
    spec.kind = kind;
    if (kind != CorruptionKind::None && kind != CorruptionKind::Poisson)
        spec.params = Eigen::VectorXd::Constant(n_features, param);
    if (excluded >= 0) {
        spec.corrupt_mask.assign(n_features, 1);
        spec.corrupt_mask[excluded] = 0;
    }
    return spec;
}

void CorruptionSpec::validate(int n_features) const {
    if (!corrupt_mask.empty() && static_cast<int>(corrupt_mask.size()) != n_features)
        throw std::invalid_argument("corrupt_mask size does not match feature count");
    if (kind == CorruptionKind::None || kind == CorruptionKind::Poisson) return;
    if (params.size() != n_features)
        throw std::invalid_argument("corruption parameter vector size does not match feature count");
    for (int d = 0; d < n_features; ++d) {
        const double p = params[d];
        switch (kind) {
            case CorruptionKind::Dropout:
            case CorruptionKind::Blankout:
            case CorruptionKind::Multinomial:
                if (!(p >= 0.0 && p < 1.0))
                    throw std::invalid_argument("corruption probability must lie in [0,1), got " + std::to_string(p));
                break;
            case CorruptionKind::Gaussian:
            case CorruptionKind::Laplace:
                if (!(p >= 0.0))
                    throw std::invalid_argument("noise scale must be nonnegative, got " + std::to_string(p));
                break;
            default: break;
        }
    }
    if (kind == CorruptionKind::Multinomial) {
        if (n_categories < 2) throw std::invalid_argument("multinomial corruption requires n_categories >= 2");
        int corruptible = 0;
        for (int d = 0; d < n_features; ++d) {
            if (!corrupts(d)) continue;
            if (d != corruptible)
                throw std::invalid_argument("multinomial corruption requires corruptible features to be a prefix");
            ++corruptible;
        }
        if (corruptible % n_categories != 0)
            throw std::invalid_argument("multinomial corruption requires whole 1-of-K blocks");
    }
}

Moments moments(const CorruptionSpec& spec, double x, int d) {
    if (!spec.corrupts(d)) return {x, 0.0};
    switch (spec.kind) {
        case CorruptionKind::None: return {x, 0.0};
        case CorruptionKind::Dropout: {
            const double q = spec.param(d);
            return {(1.0 - q) * x, q * (1.0 - q) * x * x};
        }
        case CorruptionKind::Blankout: {
            const double q = spec.param(d);
            return {x, x * x * q / (1.0 - q)};
        }
        case CorruptionKind::Gaussian: {
            const double s = spec.param(d);
            return {x, s * s};
        }
        case CorruptionKind::Laplace: {
            const double l = spec.param(d);
            return {x, 2.0 * l * l};
        }
        case CorruptionKind::Poisson:
            check_poisson_domain(x);
            return {x, x};
        case CorruptionKind::Multinomial: no_multinomial_scalar();
    }
    return {x, 0.0};
}

double log_mgf(const CorruptionSpec& spec, double t, double x, int d) {
    if (!spec.corrupts(d)) return t * x;
    switch (spec.kind) {
        case CorruptionKind::None: return t * x;
        case CorruptionKind::Dropout: return log_mix(spec.param(d), t * x);
        case CorruptionKind::Blankout: {
            const double q = spec.param(d);
            return log_mix(q, t * x / (1.0 - q));
        }
        case CorruptionKind::Gaussian: {
            const double s = spec.param(d);
            return t * x + 0.5 * s * s * t * t;
        }
        case CorruptionKind::Laplace: {
            const double l = spec.param(d);
            const double u = l * l * t * t;
            if (u >= 1.0) return kInf;
            return t * x - std::log1p(-u);
        }
        case CorruptionKind::Poisson:
            check_poisson_domain(x);
            return x * std::expm1(t);
        case CorruptionKind::Multinomial: no_multinomial_scalar();
    }
    return t * x;
}

double log_mgf_zero(const CorruptionSpec& spec, double t, int d) {
    if (!spec.corrupts(d) || !spec.additive()) return 0.0;
    return log_mgf(spec, t, 0.0, d);
}

double dlog_mgf_dt(const CorruptionSpec& spec, double t, double x, int d) {
    if (!spec.corrupts(d)) return x;
    switch (spec.kind) {
        case CorruptionKind::None: return x;
        case CorruptionKind::Dropout: return x * log_mix_slope(spec.param(d), t * x);
        case CorruptionKind::Blankout: {
            const double q = spec.param(d);
            const double c = x / (1.0 - q);
            return c * log_mix_slope(q, t * c);
        }
        case CorruptionKind::Gaussian: {
            const double s = spec.param(d);
            return x + s * s * t;
        }
        case CorruptionKind::Laplace: {
            const double l = spec.param(d);
            const double u = l * l * t * t;
            if (u >= 1.0) throw std::domain_error("laplace MGF gradient evaluated at its pole");
            return x + 2.0 * l * l * t / (1.0 - u);
        }
        case CorruptionKind::Poisson:
            check_poisson_domain(x);
            return x * std::exp(t);
        case CorruptionKind::Multinomial: no_multinomial_scalar();
    }
    return x;
}

double dlog_mgf_zero_dt(const CorruptionSpec& spec, double t, int d) {
    if (!spec.corrupts(d) || !spec.additive()) return 0.0;
    return dlog_mgf_dt(spec, t, 0.0, d);
}

double log_mgf_with_slope(const CorruptionSpec& spec, double t, double x, int d, double* dlog_dt) {
    if (!spec.corrupts(d)) {
        *dlog_dt = x;
        return t * x;
    }
    switch (spec.kind) {
        case CorruptionKind::Dropout:
        case CorruptionKind::Blankout: {
            const double q = spec.param(d);
            const double c = spec.kind == CorruptionKind::Blankout ? x / (1.0 - q) : x;
            const double a = t * c;
            if (a == 0.0) {
                *dlog_dt = (1.0 - q) * c;
                return 0.0;
            }
            if (a <= 0.0) {
                const double e = std::exp(a);
                const double mix = q + (1.0 - q) * e;
                *dlog_dt = c * (1.0 - q) * e / mix;
                return std::log(mix);
            }
            const double e = std::exp(-a);
            const double mix = q * e + (1.0 - q);
            *dlog_dt = c * (1.0 - q) / mix;
            return a + std::log(mix);
        }
        case CorruptionKind::Poisson: {
            check_poisson_domain(x);
            const double e = std::expm1(t);
            *dlog_dt = x * (e + 1.0);
            return x * e;
        }
        default:
            *dlog_dt = dlog_mgf_dt(spec, t, x, d);
            return log_mgf(spec, t, x, d);
    }
}

double mgf(const CorruptionSpec& spec, double t, double x, int d) {
    const double lm = log_mgf(spec, t, x, d);
    return std::isinf(lm) ? kInf : std::exp(lm);
}

double mgf_dw(const CorruptionSpec& spec, double y, double w, double x, int d) {
    const double t = -y * w;
    return -y * mgf(spec, t, x, d) * dlog_mgf_dt(spec, t, x, d);
}

double log_mgf_block(double q, int k_categories, const double* t, int active, double value) {
    bool all_zero = true;
    for (int k = 0; k < k_categories && all_zero; ++k) all_zero = t[k] * value == 0.0;
    if (all_zero) return 0.0;

    const double log_keep = std::log1p(-q);
    const double log_move = q > 0.0 ? std::log(q / (k_categories - 1)) : -kInf;
    double m = -kInf;
    for (int k = 0; k < k_categories; ++k) {
        const double term = (k == active ? log_keep : log_move) + t[k] * value;
        m = std::max(m, term);
    }
    double s = 0.0;
    for (int k = 0; k < k_categories; ++k) {
        const double term = (k == active ? log_keep : log_move) + t[k] * value;
        if (term != -kInf) s += std::exp(term - m);
    }
    return m + std::log(s);
}

void dlog_mgf_block_dt(double q, int k_categories, const double* t, int active, double value, double* out) {
    const double log_keep = std::log1p(-q);
    const double log_move = q > 0.0 ? std::log(q / (k_categories - 1)) : -kInf;
    const double log_b = log_mgf_block(q, k_categories, t, active, value);
    for (int k = 0; k < k_categories; ++k) {
        const double term = (k == active ? log_keep : log_move) + t[k] * value;
        out[k] = term == -kInf ? 0.0 : value * std::exp(term - log_b);
    }
}

SparseRow sample_corrupted(const CorruptionSpec& spec, const SparseRow& row, int n_features, std::uint64_t seed) {
    if (spec.kind == CorruptionKind::None) return row;
    Rng rng(seed);
    SparseRow out;

    switch (spec.kind) {
        case CorruptionKind::Dropout:
        case CorruptionKind::Blankout:
            out.reserve(row.size());
            for (const auto& [d, x] : row) {
                if (!spec.corrupts(d)) {
                    out.push_back({d, x});
                    continue;
                }
                const double q = spec.param(d);
                if (rng.uniform() < q) continue;
                out.push_back({d, spec.kind == CorruptionKind::Blankout ? x / (1.0 - q) : x});
            }
            return out;

        case CorruptionKind::Poisson:
            out.reserve(row.size());
            for (const auto& [d, x] : row) {
                if (!spec.corrupts(d)) {
                    out.push_back({d, x});
                    continue;
                }
                check_poisson_domain(x);
                const double v = static_cast<double>(rng.poisson(x));
                if (v != 0.0) out.push_back({d, v});
            }
            return out;

        case CorruptionKind::Gaussian:
        case CorruptionKind::Laplace: {
            // Additive noise lands on every coordinate, stored or not.
            auto it = row.begin();
            for (int d = 0; d < n_features; ++d) {
                double x = 0.0;
                if (it != row.end() && it->index == d) {
                    x = it->value;
                    ++it;
                }
                if (spec.corrupts(d)) {
                    const double p = spec.param(d);
                    x = spec.kind == CorruptionKind::Gaussian ? rng.normal(x, p) : rng.laplace(x, p);
                }
                if (x != 0.0) out.push_back({d, x});
            }
            return out;
        }

        case CorruptionKind::Multinomial: {
            const int k = spec.n_categories;
            out = row;
            for (auto& [d, x] : out) {
                if (!spec.corrupts(d)) continue;
                const double q = spec.param(d);
                if (rng.uniform() >= q) continue;
                const int block = d / k;
                const int slot = d % k;
                int target = static_cast<int>(rng.uniform_int(k - 1));
                if (target >= slot) ++target;
                d = block * k + target;
            }
            std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.index < b.index; });
            for (std::size_t i = 1; i < out.size(); ++i)
                if (out[i].index == out[i - 1].index)
                    throw std::invalid_argument("multinomial corruption requires one active value per block");
            return out;
        }

        case CorruptionKind::None: break;
    }
    return row;
}

}  // namespace mcf
