#pragma once

#include <cstddef>

namespace mcf {

// Pairwise-tree summation over f(0..n-1). The reduction tree is a function of
// n alone, so results are reproducible run to run and independent of any
// batching of the leaf evaluations.
template <typename F>
double pairwise_sum(std::size_t begin, std::size_t end, F&& f) {
    const std::size_t n = end - begin;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = begin + n / 2;
    const double left = pairwise_sum(begin, mid, f);   // leaves evaluate in
    const double right = pairwise_sum(mid, end, f);    // ascending order
    return left + right;
}

template <typename F>
double pairwise_sum(std::size_t n, F&& f) {
    return pairwise_sum<F>(0, n, static_cast<F&&>(f));
}

}  // namespace mcf
