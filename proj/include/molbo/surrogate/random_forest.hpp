#ifndef MOLBO_SURROGATE_RANDOM_FOREST_HPP
#define MOLBO_SURROGATE_RANDOM_FOREST_HPP

#include <cmath>
#include <vector>

#include "molbo/parallel.hpp"
#include "molbo/rng.hpp"
#include "molbo/surrogate/common.hpp"
#include "molbo/surrogate/tree.hpp"

namespace molbo {

/// Bagged CART regression trees. Mean is the tree average; variance is the
/// population variance of the individual tree predictions.
class RandomForest final : public Surrogate {
public:
    SurrogateKind kind() const noexcept override { return SurrogateKind::RandomForest; }

    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

protected:
    void do_fit(const FeatureMatrix& x, std::span<const double> y, const TrainConfig& cfg) override {
        const auto& p = cfg.forest;
        if (p.n_trees < 1) throw Error(Errc::ConfigInvalid, "n_trees must be >= 1");
        const detail::SplitData data(x);
        DepthFirstOptions opt;
        opt.max_depth = p.max_depth;
        opt.min_samples_leaf = static_cast<std::size_t>(std::max(1, p.min_samples_leaf));
        opt.max_features = p.max_features > 0
                               ? static_cast<std::size_t>(p.max_features)
                               : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));

        std::vector<double> target(y.begin(), y.end());
        trees_.assign(static_cast<std::size_t>(p.n_trees), {});
        // one generator per tree: results do not depend on cfg.jobs
        parallel_for(trees_.size(), cfg.jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t t = begin; t < end; ++t) {
                auto rng = Rng::stream(cfg.seed, Stream::Model, t);
                std::vector<std::uint32_t> samples(x.rows());
                if (p.bootstrap) {
                    for (auto& s : samples) s = static_cast<std::uint32_t>(rng.uniform_index(x.rows()));
                } else {
                    std::iota(samples.begin(), samples.end(), 0u);
                }
                trees_[t] = grow_depth_first(data, std::move(samples), target, opt, rng);
            }
        });
    }

    Prediction predict_row(const FeatureMatrix& x, std::size_t row) const override {
        std::vector<double> members(trees_.size());
        for (std::size_t t = 0; t < trees_.size(); ++t) members[t] = trees_[t].predict(x, row);
        const double mean = std::accumulate(members.begin(), members.end(), 0.0) / static_cast<double>(members.size());
        return {mean, members.size() >= 2 ? ensemble_variance(members) : 0.0};
    }

    nlohmann::json save_state() const override {
        nlohmann::json j;
        j["trees"] = nlohmann::json::array();
        for (const auto& t : trees_) j["trees"].push_back(t.to_json());
        return j;
    }

    void load_state(const nlohmann::json& j) override {
        trees_.clear();
        for (const auto& t : j.at("trees")) trees_.push_back(RegressionTree::from_json(t));
    }

private:
    std::vector<RegressionTree> trees_;
};

} // namespace molbo

#endif
