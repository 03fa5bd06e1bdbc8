#ifndef MOLBO_FINGERPRINT_HPP
#define MOLBO_FINGERPRINT_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "molbo/error.hpp"
#include "molbo/hash.hpp"
#include "molbo/parallel.hpp"
#include "molbo/rng.hpp"
#include "molbo/smiles.hpp"

namespace molbo {

enum class FingerprintKind : std::uint8_t { Morgan, AtomPair };

/// Fixed-width folded bit vector.
class Fingerprint {
public:
    Fingerprint() = default;
    Fingerprint(FingerprintKind kind, std::uint32_t width, int min_radius, int max_radius)
        : words_((width + 63) / 64, 0), width_(width), kind_(kind),
          min_radius_(min_radius), max_radius_(max_radius) {}

    std::uint32_t width() const noexcept { return width_; }
    FingerprintKind kind() const noexcept { return kind_; }
    int min_radius() const noexcept { return min_radius_; }
    int max_radius() const noexcept { return max_radius_; }

    void set(std::uint32_t bit) { words_[bit >> 6] |= std::uint64_t{1} << (bit & 63); }
    bool test(std::uint32_t bit) const { return (words_[bit >> 6] >> (bit & 63)) & 1u; }

    std::uint32_t popcount() const noexcept {
        std::uint32_t n = 0;
        for (auto w : words_) n += static_cast<std::uint32_t>(std::popcount(w));
        return n;
    }

    /// Indices of set bits, ascending.
    std::vector<std::uint32_t> on_bits() const {
        std::vector<std::uint32_t> out;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word) {
                out.push_back(static_cast<std::uint32_t>(w * 64 + std::countr_zero(word)));
                word &= word - 1;
            }
        }
        return out;
    }

    /// Lowercase hex, two digits per byte; byte j holds bits 8j..8j+7 with
    /// bit 8j in the least significant position.
    std::string to_hex() const {
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string out;
        out.reserve(width_ / 4);
        for (std::uint32_t byte = 0; byte < width_ / 8; ++byte) {
            const auto v = static_cast<std::uint8_t>(words_[byte / 8] >> (8 * (byte % 8)));
            out.push_back(kDigits[v >> 4]);
            out.push_back(kDigits[v & 15]);
        }
        return out;
    }

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    bool operator==(const Fingerprint&) const = default;

private:
    std::vector<std::uint64_t> words_;
    std::uint32_t width_ = 0;
    FingerprintKind kind_ = FingerprintKind::Morgan;
    int min_radius_ = 0;
    int max_radius_ = 0;
};

struct FingerprintSpec {
    FingerprintKind kind = FingerprintKind::AtomPair;
    std::uint32_t width = 2048;
    int min_radius = 1;  // atom-pair only
    int max_radius = 3;  // atom-pair max distance, or Morgan radius

    bool operator==(const FingerprintSpec&) const = default;

    static FingerprintSpec morgan(int radius, std::uint32_t width = 2048) {
        return {FingerprintKind::Morgan, width, 0, radius};
    }
    static FingerprintSpec atom_pair(int min_radius = 1, int max_radius = 3, std::uint32_t width = 2048) {
        return {FingerprintKind::AtomPair, width, min_radius, max_radius};
    }
};

namespace detail {

inline void check_width(std::uint32_t width, std::uint32_t minimum) {
    if (width < minimum || !std::has_single_bit(width)) {
        throw Error(Errc::WidthMismatch, "fingerprint width must be a power of two >= " +
                                             std::to_string(minimum) + ", got " + std::to_string(width));
    }
}

} // namespace detail

/// Radius-0 atom identifiers: hash of (element, degree, charge, H count,
/// aromatic flag, ring membership).
inline std::vector<std::uint64_t> atom_invariants(const MolGraph& g) {
    const auto in_ring = g.ring_atoms();
    std::vector<std::uint64_t> ids(g.atom_count());
    for (std::size_t i = 0; i < g.atom_count(); ++i) {
        const auto& a = g.atoms()[i];
        ids[i] = Hasher()
                     .bytes(a.element)
                     .i64(a.degree)
                     .i64(a.formal_charge)
                     .i64(a.explicit_h)
                     .u64(a.aromatic ? 1 : 0)
                     .u64(in_ring[i] ? 1 : 0)
                     .digest();
    }
    return ids;
}

/// ECFP-style circular fingerprint folded to `width` bits.
inline Fingerprint morgan_fingerprint(const MolGraph& g, int radius, std::uint32_t width = 2048) {
    if (radius < 0) throw Error(Errc::ConfigInvalid, "Morgan radius must be >= 0");
    detail::check_width(width, 64);
    Fingerprint fp(FingerprintKind::Morgan, width, 0, radius);

    std::vector<std::uint64_t> ids = atom_invariants(g);
    std::vector<std::uint64_t> seen(ids);
    std::vector<std::uint64_t> next(ids.size());
    std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
    for (int r = 1; r <= radius; ++r) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            env.clear();
            for (const auto& nb : g.neighbors(i)) {
                env.emplace_back(static_cast<std::uint64_t>(nb.order), ids[nb.atom]);
            }
            std::sort(env.begin(), env.end());
            Hasher h;
            h.i64(r).u64(ids[i]).u64(env.size());
            for (const auto& [order, id] : env) h.u64(order).u64(id);
            next[i] = h.digest();
        }
        ids.swap(next);
        seen.insert(seen.end(), ids.begin(), ids.end());
    }
    // identical environments collapse on the identifier value
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto id : seen) fp.set(static_cast<std::uint32_t>(id & (width - 1)));
    return fp;
}

/// Topological distances from `source`; unreachable atoms get -1.
inline std::vector<int> shortest_paths(const MolGraph& g, std::uint32_t source) {
    std::vector<int> dist(g.atom_count(), -1);
    std::queue<std::uint32_t> frontier;
    dist[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        const auto at = frontier.front();
        frontier.pop();
        for (const auto& nb : g.neighbors(at)) {
            if (dist[nb.atom] < 0) {
                dist[nb.atom] = dist[at] + 1;
                frontier.push(nb.atom);
            }
        }
    }
    return dist;
}

inline Fingerprint atom_pair_fingerprint(const MolGraph& g, int min_radius = 1, int max_radius = 3,
                                         std::uint32_t width = 2048) {
    if (min_radius < 1 || max_radius < min_radius) {
        throw Error(Errc::ConfigInvalid, "atom-pair distances need 1 <= min_radius <= max_radius");
    }
    detail::check_width(width, 1);
    Fingerprint fp(FingerprintKind::AtomPair, width, min_radius, max_radius);
    const auto inv = atom_invariants(g);
    const auto n = static_cast<std::uint32_t>(g.atom_count());
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto dist = shortest_paths(g, i);
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const int d = dist[j];
            if (d < min_radius || d > max_radius) continue;
            const auto lo = std::min(inv[i], inv[j]);
            const auto hi = std::max(inv[i], inv[j]);
            const auto h = Hasher().u64(lo).u64(hi).i64(d).digest();
            fp.set(static_cast<std::uint32_t>(h & (width - 1)));
        }
    }
    return fp;
}

inline Fingerprint compute_fingerprint(const MolGraph& g, const FingerprintSpec& spec) {
    return spec.kind == FingerprintKind::Morgan
               ? morgan_fingerprint(g, spec.max_radius, spec.width)
               : atom_pair_fingerprint(g, spec.min_radius, spec.max_radius, spec.width);
}

/// 2|a & b| / (|a| + |b|); two empty fingerprints compare as 1.
inline double dice_similarity(const Fingerprint& a, const Fingerprint& b) {
    if (a.width() != b.width() || a.kind() != b.kind()) {
        throw Error(Errc::WidthMismatch, "Dice similarity needs fingerprints of the same width and kind");
    }
    std::uint64_t both = 0, na = 0, nb = 0;
    const auto& wa = a.words();
    const auto& wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) {
        both += static_cast<std::uint64_t>(std::popcount(wa[i] & wb[i]));
        na += static_cast<std::uint64_t>(std::popcount(wa[i]));
        nb += static_cast<std::uint64_t>(std::popcount(wb[i]));
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

struct DiceSampling {
    /// Above this many fingerprints, a seeded subsample of pairs is used.
    std::size_t exact_threshold = 5000;
    std::uint64_t pairs = 100000;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

/// Mean Dice similarity over unordered pairs. Exact below
/// `sampling.exact_threshold`, otherwise over `sampling.pairs` distinct pairs
/// drawn uniformly without replacement.
inline double mean_pairwise_dice(const std::vector<Fingerprint>& fps, const DiceSampling& sampling = {}) {
    const std::uint64_t n = fps.size();
    if (n < 2) throw Error(Errc::TooFewItems, "mean pairwise Dice needs at least two fingerprints");
    const std::uint64_t total = n * (n - 1) / 2;

    if (n <= sampling.exact_threshold || sampling.pairs >= total) {
        // per-row partial sums keep the reduction order fixed regardless of jobs
        std::vector<double> row_sum(n, 0.0);
        parallel_for(n, sampling.jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                double s = 0.0;
                for (std::size_t j = i + 1; j < n; ++j) s += dice_similarity(fps[i], fps[j]);
                row_sum[i] = s;
            }
        });
        double sum = 0.0;
        for (double s : row_sum) sum += s;
        return sum / static_cast<double>(total);
    }

    auto rng = Rng::stream(sampling.seed, Stream::Diversity);
    const auto picks = rng.sample_without_replacement(total, sampling.pairs);
    // row i owns linear pair indices [start(i), start(i) + n - 1 - i)
    auto start = [n](std::uint64_t i) { return i * (2 * n - i - 1) / 2; };
    std::vector<double> values(picks.size());
    parallel_for(picks.size(), sampling.jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const std::uint64_t t = picks[p];
            std::uint64_t lo = 0, hi = n - 1;
            while (lo + 1 < hi) {
                const std::uint64_t mid = (lo + hi) / 2;
                if (start(mid) <= t) lo = mid; else hi = mid;
            }
            const std::uint64_t i = lo;
            const std::uint64_t j = i + 1 + (t - start(i));
            values[p] = dice_similarity(fps[i], fps[j]);
        }
    });
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace molbo

#endif
