#ifndef MOLBO_SURROGATE_MLP_HPP
#define MOLBO_SURROGATE_MLP_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "molbo/rng.hpp"
#include "molbo/surrogate/common.hpp"

namespace molbo {

/// Fully connected regression head: input -> hidden ReLU layers -> output.
/// MSE mode has one output (mean); NLL mode has two (mean, log-variance).
/// Targets are standardized internally. Training uses Adam on minibatches
/// with a seeded train/validation split and patience-based early stopping,
/// restoring the best-validation parameters.
class Mlp final : public Surrogate {
public:
    explicit Mlp(SurrogateKind kind = SurrogateKind::FingerprintMlp) : kind_(kind) {}

    SurrogateKind kind() const noexcept override { return kind_; }

    /// Layer widths including input and output, e.g. {2048, 256, 128, 2}.
    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> out;
        if (shapes_.empty()) return out;
        out.push_back(shapes_.front().in);
        for (const auto& s : shapes_) out.push_back(s.out);
        return out;
    }
    LossMode mode() const noexcept { return mode_; }
    int epochs_run() const noexcept { return epochs_run_; }
    int best_epoch() const noexcept { return best_epoch_; }
    std::size_t train_rows() const noexcept { return train_rows_; }
    std::size_t validation_rows() const noexcept { return validation_rows_; }

protected:
    void do_fit(const FeatureMatrix& x, std::span<const double> y, const TrainConfig& cfg) override {
        if (kind_ == SurrogateKind::FingerprintMlp && !x.is_binary()) {
            throw Error(Errc::ConfigInvalid, "fingerprint MLP expects bit features");
        }
        if (kind_ == SurrogateKind::EmbeddingMlp && x.source() != FeatureSource::ExternalEmbedding) {
            throw Error(Errc::ConfigInvalid, "embedding MLP expects external embedding features");
        }
        const auto& p = cfg.mlp;
        if (p.batch_size < 1 || p.max_epochs < 1 || !(p.learning_rate > 0.0)) {
            throw Error(Errc::ConfigInvalid, "MLP needs batch_size >= 1, max_epochs >= 1, learning_rate > 0");
        }
        mode_ = cfg.mode;
        const std::size_t n = x.rows();
        const std::size_t out_dim = mode_ == LossMode::Nll ? 2 : 1;
        build_shapes(x.cols(), p.hidden, out_dim);

        y_mean_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : y) ss += (v - y_mean_) * (v - y_mean_);
        y_scale_ = std::sqrt(ss / static_cast<double>(n));
        auto split_rng = Rng::stream(cfg.seed, Stream::Split);
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        split_rng.shuffle(order);
        const auto [n_train, n_val] = split_sizes(n, cfg.split_fraction);
        train_rows_ = n_train;
        validation_rows_ = n_val;

        auto rng = Rng::stream(cfg.seed, Stream::Model);
        init_params(rng);
        if (y_scale_ == 0.0) {
            // constant targets: the standardized target is identically zero
            constant_ = true;
            epochs_run_ = best_epoch_ = 0;
            return;
        }
        constant_ = false;

        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = (y[i] - y_mean_) / y_scale_;
        std::vector<std::uint32_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        const std::vector<std::uint32_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

        std::vector<double> grad(params_.size()), m1(params_.size(), 0.0), m2(params_.size(), 0.0);
        std::vector<double> best = params_;
        EarlyStopping stopper(cfg.patience);
        Workspace ws(shapes_);
        const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        std::uint64_t step = 0;

        for (int epoch = 1; epoch <= p.max_epochs; ++epoch) {
            rng.shuffle(train);
            for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(p.batch_size)) {
                const std::size_t stop = std::min(train.size(), start + static_cast<std::size_t>(p.batch_size));
                std::fill(grad.begin(), grad.end(), 0.0);
                for (std::size_t k = start; k < stop; ++k) {
                    const auto row = train[k];
                    forward(x, row, ws);
                    const auto& out = ws.act.back();
                    std::vector<double>& dout = ws.delta.back();
                    if (mode_ == LossMode::Mse) {
                        dout[0] = out[0] - t[row];
                    } else {
                        const auto g = nll_gradient(t[row], out[0], out[1]);
                        dout[0] = g.d_mean;
                        dout[1] = g.d_log_var;
                    }
                    backward(x, row, ws, grad);
                }
                const double inv = 1.0 / static_cast<double>(stop - start);
                ++step;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t i = 0; i < params_.size(); ++i) {
                    const double g = grad[i] * inv;
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
                    params_[i] -= p.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
                }
            }
            const bool stop = stopper.observe(validation_loss(x, val, t, ws));
            if (stopper.improved()) best = params_;
            epochs_run_ = epoch;
            if (stop) break;
        }
        params_ = std::move(best);
        best_epoch_ = stopper.best_epoch();
    }

    Prediction predict_row(const FeatureMatrix& x, std::size_t row) const override {
        if (constant_) return {y_mean_, mode_ == LossMode::Nll ? kVarianceFloor : 0.0};
        Workspace ws(shapes_);
        forward(x, row, ws);
        const auto& out = ws.act.back();
        const double mean = y_mean_ + y_scale_ * out[0];
        if (mode_ == LossMode::Mse) return {mean, 0.0};
        const double v = std::max(std::exp(out[1]), kVarianceFloor);
        return {mean, std::max(y_scale_ * y_scale_ * v, kVarianceFloor)};
    }

    nlohmann::json save_state() const override {
        nlohmann::json j;
        j["mode"] = mode_ == LossMode::Nll ? "nll" : "mse";
        j["layers"] = layer_sizes();
        j["y_mean"] = y_mean_;
        j["y_scale"] = y_scale_;
        j["constant"] = constant_;
        j["params"] = params_;
        return j;
    }

    void load_state(const nlohmann::json& j) override {
        mode_ = j.at("mode").get<std::string>() == "nll" ? LossMode::Nll : LossMode::Mse;
        const auto sizes = j.at("layers").get<std::vector<std::size_t>>();
        if (sizes.size() < 2) throw Error(Errc::DimensionMismatch, "MLP checkpoint needs at least two layers");
        std::vector<int> hidden;
        for (std::size_t i = 1; i + 1 < sizes.size(); ++i) hidden.push_back(static_cast<int>(sizes[i]));
        build_shapes(static_cast<std::uint32_t>(sizes.front()), hidden, sizes.back());
        y_mean_ = j.at("y_mean").get<double>();
        y_scale_ = j.at("y_scale").get<double>();
        constant_ = j.at("constant").get<bool>();
        params_ = j.at("params").get<std::vector<double>>();
        if (params_.size() != param_count_) throw Error(Errc::DimensionMismatch, "MLP checkpoint parameter count");
    }

private:
    struct Shape {
        std::size_t in, out, w, b;  // weights are input-major: w[i * out + o]
    };

    struct Workspace {
        explicit Workspace(const std::vector<Shape>& shapes) {
            for (const auto& s : shapes) {
                act.emplace_back(s.out, 0.0);
                delta.emplace_back(s.out, 0.0);
            }
        }
        std::vector<std::vector<double>> act;
        std::vector<std::vector<double>> delta;
    };

    void build_shapes(std::uint32_t input, const std::vector<int>& hidden, std::size_t out_dim) {
        shapes_.clear();
        std::size_t offset = 0, prev = input;
        std::vector<std::size_t> widths;
        for (int h : hidden) {
            if (h < 1) throw Error(Errc::ConfigInvalid, "hidden layer widths must be >= 1");
            widths.push_back(static_cast<std::size_t>(h));
        }
        widths.push_back(out_dim);
        for (auto w : widths) {
            Shape s{prev, w, offset, offset + prev * w};
            offset = s.b + w;
            shapes_.push_back(s);
            prev = w;
        }
        param_count_ = offset;
    }

    void init_params(Rng& rng) {
        params_.assign(param_count_, 0.0);
        for (std::size_t l = 0; l < shapes_.size(); ++l) {
            const auto& s = shapes_[l];
            const bool last = l + 1 == shapes_.size();
            // He-uniform for ReLU layers, LeCun-uniform for the linear head
            const double bound = std::sqrt((last ? 3.0 : 6.0) / static_cast<double>(s.in));
            for (std::size_t i = 0; i < s.in * s.out; ++i) params_[s.w + i] = bound * (2.0 * rng.uniform01() - 1.0);
        }
    }

    void forward(const FeatureMatrix& x, std::size_t row, Workspace& ws) const {
        for (std::size_t l = 0; l < shapes_.size(); ++l) {
            const auto& s = shapes_[l];
            auto& out = ws.act[l];
            std::copy(params_.begin() + static_cast<std::ptrdiff_t>(s.b),
                      params_.begin() + static_cast<std::ptrdiff_t>(s.b + s.out), out.begin());
            if (l == 0) {
                if (x.is_binary()) {
                    for (auto i : x.active(row)) {
                        const double* w = &params_[s.w + i * s.out];
                        for (std::size_t o = 0; o < s.out; ++o) out[o] += w[o];
                    }
                } else {
                    const auto in = x.dense_row(row);
                    for (std::size_t i = 0; i < s.in; ++i) {
                        if (in[i] == 0.0) continue;
                        const double* w = &params_[s.w + i * s.out];
                        for (std::size_t o = 0; o < s.out; ++o) out[o] += in[i] * w[o];
                    }
                }
            } else {
                const auto& in = ws.act[l - 1];
                for (std::size_t i = 0; i < s.in; ++i) {
                    if (in[i] == 0.0) continue;
                    const double* w = &params_[s.w + i * s.out];
                    for (std::size_t o = 0; o < s.out; ++o) out[o] += in[i] * w[o];
                }
            }
            if (l + 1 < shapes_.size()) {
                for (auto& v : out) v = std::max(v, 0.0);
            }
        }
    }

    /// Expects ws.delta.back() to hold dLoss/dOutput; accumulates into grad.
    void backward(const FeatureMatrix& x, std::size_t row, Workspace& ws, std::vector<double>& grad) const {
        for (std::size_t l = shapes_.size(); l-- > 0;) {
            const auto& s = shapes_[l];
            auto& delta = ws.delta[l];
            if (l + 1 < shapes_.size()) {
                for (std::size_t o = 0; o < s.out; ++o) {
                    if (ws.act[l][o] <= 0.0) delta[o] = 0.0;
                }
            }
            for (std::size_t o = 0; o < s.out; ++o) grad[s.b + o] += delta[o];
            if (l == 0) {
                if (x.is_binary()) {
                    for (auto i : x.active(row)) {
                        double* g = &grad[s.w + i * s.out];
                        for (std::size_t o = 0; o < s.out; ++o) g[o] += delta[o];
                    }
                } else {
                    const auto in = x.dense_row(row);
                    for (std::size_t i = 0; i < s.in; ++i) {
                        if (in[i] == 0.0) continue;
                        double* g = &grad[s.w + i * s.out];
                        for (std::size_t o = 0; o < s.out; ++o) g[o] += in[i] * delta[o];
                    }
                }
            } else {
                const auto& in = ws.act[l - 1];
                auto& below = ws.delta[l - 1];
                for (std::size_t i = 0; i < s.in; ++i) {
                    const double* w = &params_[s.w + i * s.out];
                    double* g = &grad[s.w + i * s.out];
                    double acc = 0.0;
                    for (std::size_t o = 0; o < s.out; ++o) {
                        g[o] += in[i] * delta[o];
                        acc += w[o] * delta[o];
                    }
                    below[i] = acc;
                }
            }
        }
    }

    double validation_loss(const FeatureMatrix& x, const std::vector<std::uint32_t>& rows,
                           const std::vector<double>& t, Workspace& ws) const {
        double total = 0.0;
        for (auto row : rows) {
            forward(x, row, ws);
            const auto& out = ws.act.back();
            if (mode_ == LossMode::Mse) {
                const double r = out[0] - t[row];
                total += r * r;
            } else {
                total += nll_loss(t[row], out[0], std::exp(out[1]));
            }
        }
        return total / static_cast<double>(rows.size());
    }

    SurrogateKind kind_;
    LossMode mode_ = LossMode::Mse;
    std::vector<Shape> shapes_;
    std::size_t param_count_ = 0;
    std::vector<double> params_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    bool constant_ = false;
    int epochs_run_ = 0;
    int best_epoch_ = 0;
    std::size_t train_rows_ = 0;
    std::size_t validation_rows_ = 0;
};

} // namespace molbo

#endif
