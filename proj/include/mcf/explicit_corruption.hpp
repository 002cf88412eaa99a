#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "mcf/corruption.hpp"
#include "mcf/data.hpp"
#include "mcf/types.hpp"

namespace mcf {

// M corrupted copies of every example, replicate-contiguous per example,
// deterministic per (seed, example, replicate). Guards against materializing
// more than `max_nonzeros` entries.
SparseExampleSet replicate(const SparseExampleSet& set, const CorruptionSpec& spec, int m, std::uint64_t seed,
                           double max_nonzeros = 1e8);

struct McLossEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

// Mean and standard error, over M corrupted replicas of the data set, of the
// plain per-replica loss (1/N) sum_n L(x~_nm, y_n; w). Streams; nothing is
// materialized.
McLossEstimate mc_expected_loss(const SparseExampleSet& set, const Eigen::VectorXd& targets_pm,
                                const CorruptionSpec& spec, const Eigen::VectorXd& w, LossKind loss, int m,
                                std::uint64_t seed);

}  // namespace mcf
