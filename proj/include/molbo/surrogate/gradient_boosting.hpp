#ifndef MOLBO_SURROGATE_GRADIENT_BOOSTING_HPP
#define MOLBO_SURROGATE_GRADIENT_BOOSTING_HPP

#include <numeric>
#include <vector>

#include "molbo/surrogate/common.hpp"
#include "molbo/surrogate/tree.hpp"

namespace molbo {

/// Squared-error gradient boosting with leaf-wise trees.
///
/// Boosted trees fit residuals, so their individual outputs are not
/// predictions of y. The uncertainty reported here is the population
/// variance of the staged cumulative predictions F_1(x) .. F_M(x), where
/// F_m = F_0 + sum_{t<=m} shrinkage * tree_t(x) and F_0 is the target mean.
class GradientBoostedTrees final : public Surrogate {
public:
    SurrogateKind kind() const noexcept override { return SurrogateKind::GradientBoosting; }

    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    double base_score() const noexcept { return base_; }

protected:
    void do_fit(const FeatureMatrix& x, std::span<const double> y, const TrainConfig& cfg) override {
        const auto& p = cfg.boosting;
        if (p.n_trees < 1) throw Error(Errc::ConfigInvalid, "n_trees must be >= 1");
        if (!(p.learning_rate > 0.0)) throw Error(Errc::ConfigInvalid, "learning_rate must be > 0");
        const detail::SplitData data(x);
        LeafWiseOptions opt;
        opt.max_depth = p.max_depth;
        opt.max_leaves = p.max_leaves;
        opt.min_samples_leaf = static_cast<std::size_t>(std::max(1, p.min_samples_leaf));
        opt.leaf_scale = p.learning_rate;

        const std::size_t n = x.rows();
        base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        std::vector<double> fitted(n, base_), residual(n);
        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0u);

        trees_.clear();
        trees_.reserve(static_cast<std::size_t>(p.n_trees));
        for (int t = 0; t < p.n_trees; ++t) {
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
            trees_.push_back(grow_leaf_wise(data, all, residual, opt));
            for (std::size_t i = 0; i < n; ++i) fitted[i] += trees_.back().predict(x, i);
        }
    }

    Prediction predict_row(const FeatureMatrix& x, std::size_t row) const override {
        std::vector<double> staged(trees_.size());
        double f = base_;
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            f += trees_[t].predict(x, row);
            staged[t] = f;
        }
        return {f, staged.size() >= 2 ? ensemble_variance(staged) : 0.0};
    }

    nlohmann::json save_state() const override {
        nlohmann::json j;
        j["base"] = base_;
        j["trees"] = nlohmann::json::array();
        for (const auto& t : trees_) j["trees"].push_back(t.to_json());
        return j;
    }

    void load_state(const nlohmann::json& j) override {
        base_ = j.at("base").get<double>();
        trees_.clear();
        for (const auto& t : j.at("trees")) trees_.push_back(RegressionTree::from_json(t));
    }

private:
    double base_ = 0.0;
    std::vector<RegressionTree> trees_;
};

} // namespace molbo

#endif
