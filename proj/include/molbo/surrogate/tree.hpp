#ifndef MOLBO_SURROGATE_TREE_HPP
#define MOLBO_SURROGATE_TREE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "molbo/features.hpp"
#include "molbo/rng.hpp"

namespace molbo {

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;
};

class RegressionTree {
public:
    double predict(const FeatureMatrix& x, std::size_t row) const {
        std::uint32_t at = 0;
        while (nodes_[at].feature >= 0) {
            const auto& n = nodes_[at];
            at = x.value(row, static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right;
        }
        return nodes_[at].value;
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
    }
    std::vector<TreeNode>& nodes() noexcept { return nodes_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    nlohmann::json to_json() const {
        auto arr = nlohmann::json::array();
        for (const auto& n : nodes_) arr.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        return arr;
    }
    static RegressionTree from_json(const nlohmann::json& j) {
        RegressionTree t;
        for (const auto& n : j) {
            t.nodes_.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<double>(), n.at(2).get<std::uint32_t>(),
                                n.at(3).get<std::uint32_t>(), n.at(4).get<double>()});
        }
        return t;
    }

private:
    std::vector<TreeNode> nodes_;
};

namespace detail {

/// Training rows prepared for histogram split search. Binary features have
/// two bins (absent/present). Dense features are quantized into at most 255
/// bins per feature with thresholds at midpoints between bin edges.
class SplitData {
public:
    static constexpr std::size_t kMaxBins = 255;

    explicit SplitData(const FeatureMatrix& x) : x_(x), n_(x.rows()), d_(x.cols()) {
        if (x.is_binary()) return;
        thresholds_.resize(d_);
        codes_.assign(n_ * d_, 0);
        std::vector<double> column(n_);
        for (std::uint32_t f = 0; f < d_; ++f) {
            for (std::size_t i = 0; i < n_; ++i) column[i] = x.dense_row(i)[f];
            std::vector<double> distinct = column;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            auto& thr = thresholds_[f];
            if (distinct.size() <= kMaxBins) {
                for (std::size_t k = 0; k + 1 < distinct.size(); ++k) thr.push_back(0.5 * (distinct[k] + distinct[k + 1]));
            } else {
                std::vector<double> sorted = column;
                std::sort(sorted.begin(), sorted.end());
                for (std::size_t b = 1; b < kMaxBins; ++b) {
                    const std::size_t q = b * n_ / kMaxBins;
                    const double lo = sorted[q - 1], hi = sorted[q];
                    if (lo < hi) thr.push_back(0.5 * (lo + hi));
                }
                thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
            }
            for (std::size_t i = 0; i < n_; ++i) {
                codes_[i * d_ + f] = static_cast<std::uint8_t>(
                    std::lower_bound(thr.begin(), thr.end(), column[i]) - thr.begin());
            }
        }
    }

    bool binary() const noexcept { return x_.is_binary(); }
    std::size_t rows() const noexcept { return n_; }
    std::uint32_t cols() const noexcept { return d_; }
    std::size_t bins(std::uint32_t f) const { return binary() ? 2 : thresholds_[f].size() + 1; }
    double threshold(std::uint32_t f, std::size_t bin) const { return binary() ? 0.5 : thresholds_[f][bin]; }

    /// True when row goes left for a split after `bin` on feature f.
    bool goes_left(std::size_t row, std::uint32_t f, std::size_t bin) const {
        if (binary()) {
            const auto a = x_.active(row);
            return !std::binary_search(a.begin(), a.end(), f);
        }
        return codes_[row * d_ + f] <= bin;
    }

    std::span<const std::uint32_t> active(std::size_t row) const { return x_.active(row); }
    std::span<const std::uint8_t> codes(std::size_t row) const { return {codes_.data() + row * d_, d_}; }

private:
    const FeatureMatrix& x_;
    std::size_t n_;
    std::uint32_t d_;
    std::vector<std::vector<double>> thresholds_;
    std::vector<std::uint8_t> codes_;
};

struct SplitChoice {
    double gain = -std::numeric_limits<double>::infinity();
    std::int32_t feature = -1;
    std::size_t bin = 0;

    bool valid() const noexcept { return feature >= 0; }

    /// Higher gain wins; equal gains go to the lower feature, then lower threshold.
    bool better_than(const SplitChoice& o) const noexcept {
        if (gain != o.gain) return gain > o.gain;
        if (feature != o.feature) return o.feature < 0 || (feature >= 0 && feature < o.feature);
        return bin < o.bin;
    }
};

/// Per-node (feature, bin) count/sum histogram over squared-error targets.
class Histogram {
public:
    void build(const SplitData& data, std::span<const std::uint32_t> samples, std::span<const double> target) {
        total_count_ = samples.size();
        total_sum_ = 0.0;
        for (auto s : samples) total_sum_ += target[s];
        if (data.binary()) {
            if (count_.size() != data.cols()) {
                count_.assign(data.cols(), 0);
                sum_.assign(data.cols(), 0.0);
            }
            for (auto f : touched_) {
                count_[f] = 0;
                sum_[f] = 0.0;
            }
            touched_.clear();
            for (auto s : samples) {
                for (auto f : data.active(s)) {
                    if (count_[f] == 0) touched_.push_back(f);
                    ++count_[f];
                    sum_[f] += target[s];
                }
            }
        } else {
            const std::size_t stride = SplitData::kMaxBins;
            count_.assign(static_cast<std::size_t>(data.cols()) * stride, 0);
            sum_.assign(count_.size(), 0.0);
            for (auto s : samples) {
                const auto codes = data.codes(s);
                for (std::uint32_t f = 0; f < data.cols(); ++f) {
                    const std::size_t slot = f * stride + codes[f];
                    ++count_[slot];
                    sum_[slot] += target[s];
                }
            }
        }
    }

    /// A feature is constant in the node when all samples share one bin.
    bool is_constant(const SplitData& data, std::uint32_t f) const {
        if (data.binary()) return count_[f] == 0 || count_[f] == total_count_;
        const std::size_t base = f * SplitData::kMaxBins;
        std::size_t nonempty = 0;
        for (std::size_t b = 0; b < data.bins(f); ++b) nonempty += count_[base + b] > 0;
        return nonempty < 2;
    }

    /// Best squared-error split of feature f; gain is the reduction in
    /// sum of squared errors: sL^2/nL + sR^2/nR - s^2/n.
    SplitChoice best_for(const SplitData& data, std::uint32_t f, std::size_t min_leaf) const {
        SplitChoice best;
        const double n = static_cast<double>(total_count_);
        const double parent = total_sum_ * total_sum_ / n;
        auto consider = [&](std::size_t left_n, double left_s, std::size_t bin) {
            const std::size_t right_n = total_count_ - left_n;
            if (left_n < min_leaf || right_n < min_leaf) return;
            const double right_s = total_sum_ - left_s;
            const double gain = left_s * left_s / static_cast<double>(left_n) +
                                right_s * right_s / static_cast<double>(right_n) - parent;
            SplitChoice c{gain, static_cast<std::int32_t>(f), bin};
            if (c.better_than(best)) best = c;
        };
        if (data.binary()) {
            consider(total_count_ - count_[f], total_sum_ - sum_[f], 0);
        } else {
            const std::size_t base = f * SplitData::kMaxBins;
            std::size_t left_n = 0;
            double left_s = 0.0;
            for (std::size_t b = 0; b + 1 < data.bins(f); ++b) {
                left_n += count_[base + b];
                left_s += sum_[base + b];
                consider(left_n, left_s, b);
            }
        }
        return best;
    }

    std::size_t count() const noexcept { return total_count_; }
    double sum() const noexcept { return total_sum_; }

private:
    std::vector<std::size_t> count_;
    std::vector<double> sum_;
    std::vector<std::uint32_t> touched_;
    std::size_t total_count_ = 0;
    double total_sum_ = 0.0;
};

inline bool is_pure(std::span<const std::uint32_t> samples, std::span<const double> target) {
    if (samples.empty()) return true;
    double lo = target[samples[0]], hi = lo;
    for (auto s : samples) {
        lo = std::min(lo, target[s]);
        hi = std::max(hi, target[s]);
    }
    return hi - lo <= 1e-12 * std::max(1.0, std::abs(hi));
}

inline double mean_of(std::span<const std::uint32_t> samples, std::span<const double> target) {
    double s = 0.0;
    for (auto i : samples) s += target[i];
    return s / static_cast<double>(samples.size());
}

inline std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>
partition(const SplitData& data, std::span<const std::uint32_t> samples, const SplitChoice& split) {
    std::vector<std::uint32_t> left, right;
    const auto f = static_cast<std::uint32_t>(split.feature);
    for (auto s : samples) {
        (data.goes_left(s, f, split.bin) ? left : right).push_back(s);
    }
    return {std::move(left), std::move(right)};
}

} // namespace detail

struct DepthFirstOptions {
    int max_depth = 8;  // 0 = unlimited
    std::size_t min_samples_leaf = 1;
    /// Features examined per split; at least one non-constant feature is
    /// always sought even past this count. 0 = all features.
    std::size_t max_features = 0;
};

/// Depth-first CART regression tree with per-split random feature subsets.
inline RegressionTree grow_depth_first(const detail::SplitData& data, std::vector<std::uint32_t> samples,
                                       std::span<const double> target, const DepthFirstOptions& opt, Rng& rng) {
    RegressionTree tree;
    auto& nodes = tree.nodes();
    detail::Histogram hist;
    std::vector<std::uint32_t> order(data.cols());

    struct Pending {
        std::uint32_t node;
        std::vector<std::uint32_t> samples;
        int depth;
    };
    std::vector<Pending> stack;
    nodes.emplace_back();
    stack.push_back({0, std::move(samples), 0});
    const std::size_t max_features = opt.max_features == 0 ? data.cols() : opt.max_features;

    while (!stack.empty()) {
        Pending p = std::move(stack.back());
        stack.pop_back();
        nodes[p.node].value = detail::mean_of(p.samples, target);
        if ((opt.max_depth > 0 && p.depth >= opt.max_depth) || p.samples.size() < 2 * opt.min_samples_leaf ||
            detail::is_pure(p.samples, target)) {
            continue;
        }
        hist.build(data, p.samples, target);

        std::iota(order.begin(), order.end(), 0u);
        detail::SplitChoice best;
        std::size_t visited = 0, non_constant = 0;
        for (std::size_t remaining = order.size(); remaining > 0 && (visited < max_features || non_constant == 0);
             --remaining) {
            const std::size_t pick = rng.uniform_index(remaining);
            const std::uint32_t f = order[pick];
            std::swap(order[pick], order[remaining - 1]);
            ++visited;
            if (hist.is_constant(data, f)) continue;
            ++non_constant;
            const auto c = hist.best_for(data, f, opt.min_samples_leaf);
            if (c.valid() && c.better_than(best)) best = c;
        }
        if (!best.valid()) continue;

        auto [left, right] = detail::partition(data, p.samples, best);
        const auto left_id = static_cast<std::uint32_t>(nodes.size());
        nodes.emplace_back();
        nodes.emplace_back();
        auto& node = nodes[p.node];
        node.feature = best.feature;
        node.threshold = data.threshold(static_cast<std::uint32_t>(best.feature), best.bin);
        node.left = left_id;
        node.right = left_id + 1;
        stack.push_back({left_id + 1, std::move(right), p.depth + 1});
        stack.push_back({left_id, std::move(left), p.depth + 1});
    }
    return tree;
}

struct LeafWiseOptions {
    int max_depth = 0;       // 0 = unlimited
    int max_leaves = 31;     // 0 = unlimited
    std::size_t min_samples_leaf = 20;
    double min_gain = 1e-12;
    double leaf_scale = 1.0;  // multiplies leaf means (shrinkage)
};

/// Best-first (leaf-wise) regression tree over all features, as used by
/// histogram gradient boosting.
inline RegressionTree grow_leaf_wise(const detail::SplitData& data, std::vector<std::uint32_t> samples,
                                     std::span<const double> target, const LeafWiseOptions& opt) {
    RegressionTree tree;
    auto& nodes = tree.nodes();
    detail::Histogram hist;

    struct Leaf {
        std::uint32_t node;
        std::vector<std::uint32_t> samples;
        int depth;
        detail::SplitChoice split;
    };
    auto evaluate = [&](Leaf& leaf) {
        nodes[leaf.node].value = opt.leaf_scale * detail::mean_of(leaf.samples, target);
        leaf.split = {};
        if ((opt.max_depth > 0 && leaf.depth >= opt.max_depth) || leaf.samples.size() < 2 * opt.min_samples_leaf ||
            detail::is_pure(leaf.samples, target)) {
            return;
        }
        hist.build(data, leaf.samples, target);
        for (std::uint32_t f = 0; f < data.cols(); ++f) {
            const auto c = hist.best_for(data, f, opt.min_samples_leaf);
            if (c.valid() && c.better_than(leaf.split)) leaf.split = c;
        }
        if (leaf.split.gain <= opt.min_gain) leaf.split = {};
    };

    std::vector<Leaf> open;
    nodes.emplace_back();
    open.push_back({0, std::move(samples), 0, {}});
    evaluate(open.back());
    std::size_t leaves = 1;

    while (opt.max_leaves == 0 || leaves < static_cast<std::size_t>(opt.max_leaves)) {
        std::size_t best = open.size();
        for (std::size_t i = 0; i < open.size(); ++i) {
            if (!open[i].split.valid()) continue;
            if (best == open.size() || open[i].split.gain > open[best].split.gain) best = i;
        }
        if (best == open.size()) break;
        Leaf leaf = std::move(open[best]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(best));

        auto [left, right] = detail::partition(data, leaf.samples, leaf.split);
        const auto left_id = static_cast<std::uint32_t>(nodes.size());
        nodes.emplace_back();
        nodes.emplace_back();
        auto& node = nodes[leaf.node];
        node.feature = leaf.split.feature;
        node.threshold = data.threshold(static_cast<std::uint32_t>(leaf.split.feature), leaf.split.bin);
        node.left = left_id;
        node.right = left_id + 1;
        open.push_back({left_id, std::move(left), leaf.depth + 1, {}});
        evaluate(open.back());
        open.push_back({left_id + 1, std::move(right), leaf.depth + 1, {}});
        evaluate(open.back());
        ++leaves;
    }
    return tree;
}

} // namespace molbo

#endif
