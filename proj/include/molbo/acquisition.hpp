#ifndef MOLBO_ACQUISITION_HPP
#define MOLBO_ACQUISITION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "molbo/error.hpp"
#include "molbo/hash.hpp"
#include "molbo/rng.hpp"
#include "molbo/surrogate/common.hpp"

namespace molbo {

enum class Strategy : std::uint8_t { Greedy, Ucb, Random };

inline std::string_view strategy_name(Strategy s) {
    switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Ucb: return "ucb";
    case Strategy::Random: return "random";
    }
    return "unknown";
}

inline Strategy parse_strategy(std::string_view name) {
    for (auto s : {Strategy::Greedy, Strategy::Ucb, Strategy::Random}) {
        if (strategy_name(s) == name) return s;
    }
    throw Error(Errc::ConfigInvalid, "unknown acquisition strategy '" + std::string(name) + "'");
}

struct AcquisitionConfig {
    Strategy strategy = Strategy::Greedy;
    /// Weight on the predicted standard deviation; read only by UCB.
    double beta = 2.0;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
};

/// Acquisition value of one candidate on the utility scale.
///   greedy: mean
///   ucb:    mean + beta * sqrt(variance)
///   random: uniform [0,1) draw keyed by (seed, candidate), ignoring the prediction
inline double acquisition_score(const Prediction& p, const AcquisitionConfig& cfg, std::uint64_t candidate = 0) {
    switch (cfg.strategy) {
    case Strategy::Greedy:
        return p.mean;
    case Strategy::Ucb:
        return p.mean + cfg.beta * std::sqrt(std::max(p.variance, 0.0));
    case Strategy::Random: {
        const auto bits = Rng::derive(cfg.seed, static_cast<std::uint64_t>(Stream::Acquisition), candidate);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }
    }
    return p.mean;
}

/// Fractional batch size of a pool: ceil(fraction * n), where products that
/// are integral up to rounding noise are not bumped to the next integer.
inline std::size_t batch_count(double fraction, std::size_t n) {
    const double x = fraction * static_cast<double>(n);
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(x));
}

/// The `batch` candidates with the highest scores, returned in ascending
/// index order. Ties go to the lower index. `candidates` and `scores` are
/// parallel arrays. Uses partial selection rather than a full sort.
inline std::vector<std::uint32_t> select_top(std::span<const std::uint32_t> candidates, std::span<const double> scores,
                                             std::size_t batch) {
    if (candidates.size() != scores.size()) throw Error(Errc::DimensionMismatch, "candidates and scores differ in length");
    if (batch > candidates.size()) {
        throw Error(Errc::PoolExhausted, "requested " + std::to_string(batch) + " but only " +
                                             std::to_string(candidates.size()) + " candidates remain");
    }
    std::vector<std::uint32_t> pos(candidates.size());
    std::iota(pos.begin(), pos.end(), 0u);
    auto key = [&](std::uint32_t i) {
        const double s = scores[i];
        return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
    };
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        const double ka = key(a), kb = key(b);
        return ka > kb || (ka == kb && candidates[a] < candidates[b]);
    };
    if (batch < pos.size()) {
        std::nth_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(batch), pos.end(), better);
    }
    std::vector<std::uint32_t> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(candidates[pos[i]]);
    std::sort(out.begin(), out.end());
    return out;
}

/// Selects the next batch from unacquired candidates. `predictions[i]`
/// belongs to `candidates[i]`.
inline std::vector<std::uint32_t> select_batch(std::span<const std::uint32_t> candidates,
                                               std::span<const Prediction> predictions, const AcquisitionConfig& cfg) {
    if (candidates.size() != predictions.size()) {
        throw Error(Errc::DimensionMismatch, "one prediction per candidate required");
    }
    std::vector<double> scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scores[i] = acquisition_score(predictions[i], cfg, candidates[i]);
    }
    return select_top(candidates, scores, cfg.batch_size);
}

/// Whole-pool form: `predictions` is indexed by pool index and `acquired`
/// lists indices that may not be selected again.
inline std::vector<std::uint32_t> select_batch(std::size_t pool_size, std::span<const std::uint32_t> acquired,
                                               std::span<const Prediction> predictions, const AcquisitionConfig& cfg) {
    if (predictions.size() != pool_size) throw Error(Errc::DimensionMismatch, "one prediction per pool entry required");
    std::vector<bool> taken(pool_size, false);
    for (auto a : acquired) {
        if (a >= pool_size) throw Error(Errc::IndexOutOfRange, "acquired index outside pool");
        taken[a] = true;
    }
    std::vector<std::uint32_t> candidates;
    std::vector<Prediction> preds;
    candidates.reserve(pool_size);
    for (std::uint32_t i = 0; i < pool_size; ++i) {
        if (taken[i]) continue;
        candidates.push_back(i);
        preds.push_back(predictions[i]);
    }
    return select_batch(candidates, preds, cfg);
}

/// ceil(fraction * n) distinct indices drawn uniformly from [0, n), ascending.
inline std::vector<std::uint32_t> initial_batch(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::ConfigInvalid, "initial fraction must lie in (0, 1)");
    const std::size_t k = std::min(n, batch_count(fraction, n));
    auto rng = Rng::stream(seed, Stream::InitialBatch);
    const auto picks = rng.sample_without_replacement(n, k);
    return {picks.begin(), picks.end()};
}

} // namespace molbo

#endif
