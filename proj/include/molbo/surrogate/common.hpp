#ifndef MOLBO_SURROGATE_COMMON_HPP
#define MOLBO_SURROGATE_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "molbo/error.hpp"
#include "molbo/features.hpp"

namespace molbo {

/// Surrogate output on the utility scale.
struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

enum class LossMode : std::uint8_t { Mse, Nll };

struct ForestParams {
    int n_trees = 100;
    int max_depth = 8;
    int min_samples_leaf = 1;
    bool bootstrap = true;
    /// 0 selects ceil(sqrt(d)).
    int max_features = 0;
};

struct BoostingParams {
    int n_trees = 100;
    /// 0 means no depth limit.
    int max_depth = 0;
    /// 0 means no leaf cap ("truly unlimited").
    int max_leaves = 31;
    int min_samples_leaf = 20;
    double learning_rate = 0.1;
};

struct MlpParams {
    std::vector<int> hidden = {256, 128};
    double learning_rate = 5e-4;
    int batch_size = 32;
    int max_epochs = 50;
};

struct TrainConfig {
    LossMode mode = LossMode::Mse;
    double split_fraction = 0.8;
    int patience = 10;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    ForestParams forest;
    BoostingParams boosting;
    MlpParams mlp;

    void validate() const {
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
            throw Error(Errc::ConfigInvalid, "split_fraction must lie in (0, 1)");
        }
        if (patience < 1) throw Error(Errc::ConfigInvalid, "patience must be >= 1");
    }
};

inline constexpr double kVarianceFloor = 1e-5;

/// Gaussian negative log-likelihood 0.5 * (log v + (mean - y)^2 / v) with
/// v = max(var, 1e-5).
inline double nll_loss(double y, double mean, double var) {
    const double v = std::max(var, kVarianceFloor);
    const double r = mean - y;
    return 0.5 * (std::log(v) + r * r / v);
}

struct NllGradient {
    double d_mean;
    double d_log_var;
};

/// Gradient of nll_loss with respect to the mean and the log-variance
/// s = log(var). Below the floor the clamp is flat in s.
inline NllGradient nll_gradient(double y, double mean, double log_var) {
    const double raw = std::exp(log_var);
    const bool clamped = raw < kVarianceFloor;
    const double v = clamped ? kVarianceFloor : raw;
    const double r = mean - y;
    return {r / v, clamped ? 0.0 : 0.5 * (1.0 - r * r / v)};
}

/// Population variance (divide by M) of per-member predictions.
inline double ensemble_variance(std::span<const double> members) {
    if (members.size() < 2) throw Error(Errc::TooFewMembers, "ensemble variance needs at least two members");
    const double m = static_cast<double>(members.size());
    const double mean = std::accumulate(members.begin(), members.end(), 0.0) / m;
    double ss = 0.0;
    for (double x : members) ss += (x - mean) * (x - mean);
    return ss / m;
}

/// Patience-based early stopping on a validation loss sequence.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Records the loss of the next epoch (1-based); returns true when
    /// training should stop.
    bool observe(double loss) {
        ++epoch_;
        if (loss < best_loss_) {
            best_loss_ = loss;
            best_epoch_ = epoch_;
            stale_ = 0;
            improved_ = true;
        } else {
            ++stale_;
            improved_ = false;
        }
        return stale_ >= patience_;
    }

    bool improved() const noexcept { return improved_; }
    int epoch() const noexcept { return epoch_; }
    int best_epoch() const noexcept { return best_epoch_; }
    double best_loss() const noexcept { return best_loss_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int stale_ = 0;
    bool improved_ = false;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

/// Train/validation sizes for a split fraction; both sides keep at least one row.
inline std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double fraction) {
    auto train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    train = std::clamp<std::size_t>(train, 1, n > 1 ? n - 1 : 1);
    return {train, n - train};
}

enum class SurrogateKind : std::uint8_t { RandomForest, GradientBoosting, FingerprintMlp, EmbeddingMlp, Oracle };

inline std::string_view surrogate_kind_name(SurrogateKind k) {
    switch (k) {
    case SurrogateKind::RandomForest: return "rf";
    case SurrogateKind::GradientBoosting: return "gbt";
    case SurrogateKind::FingerprintMlp: return "mlp";
    case SurrogateKind::EmbeddingMlp: return "embed-mlp";
    case SurrogateKind::Oracle: return "oracle";
    }
    return "unknown";
}

/// Regressor producing (mean, variance) per row. `fit` always retrains from
/// scratch. A trained model is read-only during `predict`.
class Surrogate {
public:
    virtual ~Surrogate() = default;

    virtual SurrogateKind kind() const noexcept = 0;

    void fit(const FeatureMatrix& x, std::span<const double> y, const TrainConfig& cfg) {
        if (y.size() != x.rows()) throw Error(Errc::DimensionMismatch, "target count does not match feature rows");
        if (y.size() < 5) throw Error(Errc::TooFewSamples, "fit needs at least 5 labelled rows, got " + std::to_string(y.size()));
        for (double v : y) {
            if (!std::isfinite(v)) throw Error(Errc::NonFiniteTarget, "targets must be finite");
        }
        cfg.validate();
        do_fit(x, y, cfg);
        input_dim_ = x.cols();
        binary_input_ = x.is_binary();
        trained_ = true;
    }

    std::vector<Prediction> predict(const FeatureMatrix& x, unsigned jobs = 1) const {
        std::vector<std::uint32_t> rows(x.rows());
        std::iota(rows.begin(), rows.end(), 0u);
        return predict(x, rows, jobs);
    }

    /// Predictions for the listed rows of `x`, in the order given.
    std::vector<Prediction> predict(const FeatureMatrix& x, std::span<const std::uint32_t> rows,
                                    unsigned jobs = 1) const {
        if (!trained_) throw Error(Errc::Untrained, "predict called before fit");
        if (x.cols() != input_dim_ || x.is_binary() != binary_input_) {
            throw Error(Errc::DimensionMismatch, "model trained on " + std::to_string(input_dim_) +
                                                     " features, got " + std::to_string(x.cols()));
        }
        std::vector<Prediction> out(rows.size());
        parallel_for(rows.size(), jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) out[i] = predict_row(x, rows[i]);
        });
        return out;
    }

    bool trained() const noexcept { return trained_; }
    std::uint32_t input_dim() const noexcept { return input_dim_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "molbo-surrogate";
        j["version"] = 1;
        j["kind"] = surrogate_kind_name(kind());
        j["input_dim"] = input_dim_;
        j["binary_input"] = binary_input_;
        j["model"] = save_state();
        return j;
    }

    void restore(const nlohmann::json& j) {
        input_dim_ = j.at("input_dim").get<std::uint32_t>();
        binary_input_ = j.at("binary_input").get<bool>();
        load_state(j.at("model"));
        trained_ = true;
    }

protected:
    virtual void do_fit(const FeatureMatrix& x, std::span<const double> y, const TrainConfig& cfg) = 0;
    virtual Prediction predict_row(const FeatureMatrix& x, std::size_t row) const = 0;
    virtual nlohmann::json save_state() const = 0;
    virtual void load_state(const nlohmann::json& j) = 0;

private:
    bool trained_ = false;
    bool binary_input_ = true;
    std::uint32_t input_dim_ = 0;
};

} // namespace molbo

#endif
