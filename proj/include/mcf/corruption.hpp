#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mcf/data.hpp"

namespace mcf {

// Blankout is the unbiased deletion model (x -> 0 w.p. q, else x/(1-q));
// dropout is the biased variant without the rescaling. Multinomial acts on
// contiguous 1-of-K blocks and is handled through the *_block interfaces.
enum class CorruptionKind { None, Dropout, Blankout, Gaussian, Laplace, Poisson, Multinomial };

const char* corruption_kind_name(CorruptionKind kind);
CorruptionKind corruption_kind_from_name(const std::string& name);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::None;
    Eigen::VectorXd params;            // q_d / sigma_d / lambda_d; empty for none and poisson
    std::vector<std::uint8_t> corrupt_mask;  // empty means "all features corruptible"
    int n_categories = 0;              // multinomial block width K

    static CorruptionSpec none() { return {}; }
    // Same parameter on every feature; `excluded` (typically the bias index)
    // is masked out of corruption.
    static CorruptionSpec uniform(CorruptionKind kind, int n_features, double param, int excluded = -1);

    bool corrupts(int d) const {
        if (kind == CorruptionKind::None) return false;
        return corrupt_mask.empty() || corrupt_mask[d] != 0;
    }
    double param(int d) const { return params.size() == 0 ? 0.0 : params[d]; }
    bool additive() const { return kind == CorruptionKind::Gaussian || kind == CorruptionKind::Laplace; }
    bool unbiased() const {
        return kind != CorruptionKind::Dropout && kind != CorruptionKind::Multinomial;
    }

    // Parameter ranges, mask size, and the multinomial block layout
    // (corruptible features must form a prefix of whole K-blocks).
    void validate(int n_features) const;
};

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Mean and variance of the corrupted value given the clean value x.
// Multinomial has no per-feature moments (slots within a block are coupled).
Moments moments(const CorruptionSpec& spec, double x, int d);

// log E[exp(t * corrupted(x))]. Returns +inf past the Laplace pole
// (lambda*|t| >= 1); exactly 0 at t = 0 for every kind.
double log_mgf(const CorruptionSpec& spec, double t, double x, int d);

// log-MGF evaluated at a structurally zero input. Nonzero only for the
// additive kinds; the multiplicative kinds contribute a unit factor at x = 0.
double log_mgf_zero(const CorruptionSpec& spec, double t, int d);

// d/dt log E[exp(t x~)]. Throws at the Laplace pole.
double dlog_mgf_dt(const CorruptionSpec& spec, double t, double x, int d);
double dlog_mgf_zero_dt(const CorruptionSpec& spec, double t, int d);

// log-MGF and its t-derivative in one evaluation (shares the exponential).
double log_mgf_with_slope(const CorruptionSpec& spec, double t, double x, int d, double* dlog_dt);

// E[exp(t x~)] as an extended real (+inf at the Laplace pole).
double mgf(const CorruptionSpec& spec, double t, double x, int d);

// d/dw E[exp(-y w x~)], the orientation used by the binary losses.
double mgf_dw(const CorruptionSpec& spec, double y, double w, double x, int d);

// Multinomial 1-of-K block: the active slot carries `value`; with
// probability q it moves uniformly to one of the other K-1 slots. `t` holds
// the K per-slot coefficients. Returns log E[exp(sum_k t_k x~_k)].
double log_mgf_block(double q, int k_categories, const double* t, int active, double value);
// d/dt_j of the block log-MGF, written to out[0..K).
void dlog_mgf_block_dt(double q, int k_categories, const double* t, int active, double value, double* out);

// One corrupted copy of a row, deterministic in `seed`. Multiplicative kinds
// touch stored entries only; additive kinds perturb all `n_features`
// coordinates, structural zeros included. The mask (bias) is never touched.
SparseRow sample_corrupted(const CorruptionSpec& spec, const SparseRow& row, int n_features, std::uint64_t seed);

}  // namespace mcf
