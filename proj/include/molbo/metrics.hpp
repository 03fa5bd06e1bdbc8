#ifndef MOLBO_METRICS_HPP
#define MOLBO_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "molbo/error.hpp"

namespace molbo {

/// |acquired ∩ truth| / |truth|. Both spans must be sorted ascending.
inline double topk_retrieval(std::span<const std::uint32_t> acquired, std::span<const std::uint32_t> truth) {
    if (truth.empty()) throw Error(Errc::TooFewItems, "top-k truth set is empty");
    std::size_t hits = 0;
    auto a = acquired.begin();
    auto t = truth.begin();
    while (a != acquired.end() && t != truth.end()) {
        if (*a < *t) {
            ++a;
        } else if (*t < *a) {
            ++t;
        } else {
            ++hits;
            ++a;
            ++t;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Retrieval rate relative to random selection, whose expected retrieval
/// equals the explored fraction.
inline double enrichment_factor(double retrieval, double explored_fraction) {
    if (!(explored_fraction > 0.0)) throw Error(Errc::DivisionByZero, "explored fraction must be > 0");
    if (explored_fraction > 1.0) throw Error(Errc::ConfigInvalid, "explored fraction must be <= 1");
    return retrieval / explored_fraction;
}

} // namespace molbo

#endif
