#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"

// Shared machinery for losses of the form sum_d log E[exp(t_d x~_d)].
// Additive noise contributes at structural zeros too; those terms are
// accumulated once per evaluation as Z = sum_d logmgf0(t_d) so the
// per-example pass stays O(nnz) with a correction against logmgf0.
namespace mcf::detail {

inline bool laplace_pole(const CorruptionSpec& spec, const Eigen::VectorXd& w, double scale_abs) {
    if (spec.kind != CorruptionKind::Laplace) return false;
    for (int d = 0; d < w.size(); ++d)
        if (spec.corrupts(d) && spec.param(d) * scale_abs * std::abs(w[d]) >= 1.0) return true;
    return false;
}

inline bool laplace_pole_cols(const CorruptionSpec& spec, const Eigen::MatrixXd& t_cols) {
    if (spec.kind != CorruptionKind::Laplace) return false;
    for (int d = 0; d < t_cols.rows(); ++d) {
        if (!spec.corrupts(d)) continue;
        const double l = spec.param(d);
        for (int k = 0; k < t_cols.cols(); ++k)
            if (l * std::abs(t_cols(d, k)) >= 1.0) return true;
    }
    return false;
}

// Z(c) = sum_d logmgf0(c * w_d); even in the sign of c, as is its gradient.
inline double additive_zero_sum(const CorruptionSpec& spec, const Eigen::VectorXd& w, double scale_abs,
                                Eigen::VectorXd* dz) {
    if (dz) dz->setZero(w.size());
    if (!spec.additive()) return 0.0;
    double z = 0.0;
    for (int d = 0; d < w.size(); ++d) {
        const double t = scale_abs * w[d];
        z += log_mgf_zero(spec, t, d);
        if (dz) (*dz)[d] = scale_abs * dlog_mgf_zero_dt(spec, t, d);
    }
    return z;
}

// Per-column Z for t_d = T(d, k): Z_k = sum_d logmgf0(T(d, k)).
inline Eigen::VectorXd additive_zero_sum_cols(const CorruptionSpec& spec, const Eigen::MatrixXd& t_cols) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(t_cols.cols());
    if (!spec.additive()) return z;
    for (int k = 0; k < t_cols.cols(); ++k)
        for (int d = 0; d < t_cols.rows(); ++d) z[k] += log_mgf_zero(spec, t_cols(d, k), d);
    return z;
}

// sum over the row's nonzeros of [logmgf(t_d, x) - logmgf0(t_d)] where
// t_d = t_of(d); multinomial blocks are consumed whole through their active
// slot. `scratch` must hold spec.n_categories doubles when multinomial.
template <typename TOf>
double row_logmgf_corrections(const CorruptionSpec& spec, const SparseRow& row, TOf&& t_of, double* scratch) {
    double s = 0.0;
    for (const auto& [d, x] : row) {
        if (spec.kind == CorruptionKind::Multinomial && spec.corrupts(d)) {
            const int k = spec.n_categories;
            const int base = d / k * k;
            for (int j = 0; j < k; ++j) scratch[j] = t_of(base + j);
            s += log_mgf_block(spec.param(d), k, scratch, d - base, x);
        } else {
            const double t = t_of(d);
            s += log_mgf(spec, t, x, d) - log_mgf_zero(spec, t, d);
        }
    }
    return s;
}

// Gradient counterpart: calls emit(d, ds/dt_d) for every contributing slot.
template <typename TOf, typename Emit>
void row_logmgf_correction_grads(const CorruptionSpec& spec, const SparseRow& row, TOf&& t_of, double* scratch,
                                 double* scratch2, Emit&& emit) {
    for (const auto& [d, x] : row) {
        if (spec.kind == CorruptionKind::Multinomial && spec.corrupts(d)) {
            const int k = spec.n_categories;
            const int base = d / k * k;
            for (int j = 0; j < k; ++j) scratch[j] = t_of(base + j);
            dlog_mgf_block_dt(spec.param(d), k, scratch, d - base, x, scratch2);
            for (int j = 0; j < k; ++j) emit(base + j, scratch2[j]);
        } else {
            const double t = t_of(d);
            emit(d, dlog_mgf_dt(spec, t, x, d) - dlog_mgf_zero_dt(spec, t, d));
        }
    }
}

constexpr double kLogOverflow = 700.0;

inline double exp_guarded(double s) {
    return s > kLogOverflow ? std::numeric_limits<double>::infinity() : std::exp(s);
}

}  // namespace mcf::detail
