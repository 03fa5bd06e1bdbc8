#ifndef MOLBO_CAMPAIGN_HPP
#define MOLBO_CAMPAIGN_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "molbo/acquisition.hpp"
#include "molbo/error.hpp"
#include "molbo/features.hpp"
#include "molbo/fingerprint.hpp"
#include "molbo/library.hpp"
#include "molbo/metrics.hpp"
#include "molbo/rng.hpp"
#include "molbo/surrogate/surrogate.hpp"

namespace molbo {

enum class DiversityMode : std::uint8_t { Off, Exact, Subsample };

inline std::string_view diversity_mode_name(DiversityMode m) {
    switch (m) {
    case DiversityMode::Off: return "off";
    case DiversityMode::Exact: return "exact";
    case DiversityMode::Subsample: return "subsample";
    }
    return "unknown";
}

inline DiversityMode parse_diversity_mode(std::string_view name) {
    for (auto m : {DiversityMode::Off, DiversityMode::Exact, DiversityMode::Subsample}) {
        if (diversity_mode_name(m) == name) return m;
    }
    throw Error(Errc::ConfigInvalid, "unknown diversity mode '" + std::string(name) + "'");
}

enum class LossChoice : std::uint8_t { Auto, Mse, Nll };

struct CampaignConfig {
    FeatureSource features = FeatureSource::AtomPairBits;
    FingerprintSpec fingerprint = FingerprintSpec::atom_pair(1, 3, 2048);
    SurrogateKind surrogate = SurrogateKind::GradientBoosting;
    /// Auto trains neural surrogates on NLL under UCB and on MSE otherwise;
    /// tree ensembles always use squared error.
    LossChoice loss = LossChoice::Auto;
    TrainConfig train;
    Strategy strategy = Strategy::Greedy;
    double beta = 2.0;
    double init_frac = 0.01;
    double batch_frac = 0.01;
    int iterations = 5;
    /// 0 selects 1% of the library (at least 1).
    std::size_t top_k = 0;
    std::uint64_t seed = 0;
    DiversityMode diversity = DiversityMode::Subsample;
    std::size_t diversity_threshold = 5000;
    std::uint64_t diversity_pairs = 100000;
    FingerprintSpec diversity_fingerprint = FingerprintSpec::morgan(3, 2048);
    /// Diversity after every iteration instead of only on the final set.
    bool diversity_each_iteration = false;
    unsigned jobs = 1;

    LossMode loss_mode() const {
        if (loss == LossChoice::Mse) return LossMode::Mse;
        if (loss == LossChoice::Nll) return LossMode::Nll;
        return strategy == Strategy::Ucb && is_neural(surrogate) ? LossMode::Nll : LossMode::Mse;
    }
};

struct PhaseTimes {
    double fit = 0.0;
    double predict = 0.0;
    double select = 0.0;
    double metrics = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    /// Indices labelled in this iteration, ascending.
    std::vector<std::uint32_t> acquired;
    double explored_fraction = 0.0;
    double topk_retrieval = 0.0;
    double enrichment_factor = 0.0;
    std::optional<double> mean_dice;
    /// Seconds; kept out of the deterministic trace document.
    double wall_time = 0.0;
    PhaseTimes phases;
};

struct CampaignTrace {
    CampaignConfig config;
    std::uint64_t library_checksum = 0;
    std::size_t library_size = 0;
    std::vector<IterationRecord> iterations;
    /// Cumulative acquired set, ascending.
    std::vector<std::uint32_t> acquired;
    bool complete = false;
};

/// Sizes implied by a config on a pool of n compounds.
struct CampaignBudget {
    std::size_t init = 0;
    std::size_t batch = 0;
    std::size_t total = 0;
};

inline CampaignBudget campaign_budget(const CampaignConfig& cfg, std::size_t n) {
    CampaignBudget b;
    b.init = batch_count(cfg.init_frac, n);
    b.batch = batch_count(cfg.batch_frac, n);
    b.total = b.init + static_cast<std::size_t>(std::max(0, cfg.iterations)) * b.batch;
    return b;
}

inline void validate_campaign(const CampaignConfig& cfg, const Library& lib) {
    auto bad = [](const std::string& msg) { throw Error(Errc::ConfigInvalid, msg); };
    if (!(cfg.init_frac > 0.0 && cfg.init_frac < 1.0)) bad("init_frac must lie in (0, 1)");
    if (!(cfg.batch_frac > 0.0 && cfg.batch_frac < 1.0)) bad("batch_frac must lie in (0, 1)");
    if (cfg.iterations < 0) bad("iterations must be >= 0");
    if (cfg.init_frac + cfg.iterations * cfg.batch_frac > 1.0 + 1e-9) bad("init_frac + iterations * batch_frac exceeds 1");
    if (cfg.top_k > lib.size()) bad("top_k must lie in [1, library size]");
    if (!(cfg.beta >= 0.0)) bad("beta must be >= 0");
    if (campaign_budget(cfg, lib.size()).total > lib.size()) bad("acquisition budget exceeds library size");
    cfg.train.validate();
    const bool oracle_features = cfg.features == FeatureSource::OracleUtility;
    if ((cfg.surrogate == SurrogateKind::Oracle) != oracle_features) {
        bad("the oracle surrogate and oracle features must be used together");
    }
    if (cfg.surrogate == SurrogateKind::EmbeddingMlp && cfg.features != FeatureSource::ExternalEmbedding) {
        bad("embed-mlp requires embedding features");
    }
    if (cfg.surrogate == SurrogateKind::FingerprintMlp &&
        !(cfg.features == FeatureSource::AtomPairBits || cfg.features == FeatureSource::MorganBits)) {
        bad("mlp requires fingerprint features");
    }
}

using IterationObserver = std::function<void(const CampaignTrace&)>;

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

inline std::size_t resolved_top_k(const CampaignConfig& cfg, std::size_t n) {
    return cfg.top_k != 0 ? cfg.top_k : std::max<std::size_t>(1, batch_count(0.01, n));
}

/// Retrospective batched Bayesian optimization over a scored library.
///
/// Iteration 0 labels a random initial batch. Each later iteration retrains
/// the surrogate from scratch on everything labelled so far, scores the
/// unlabelled pool, labels the best batch via the oracle, and records metrics
/// on the cumulative set. `on_iteration` sees the trace after every record
/// (for flushing). When `resume` holds a partial trace of the same campaign,
/// its records are kept and the loop continues after the last one.
inline CampaignTrace run_campaign(const Library& lib, const CampaignConfig& config,
                                  const IterationObserver& on_iteration = {}, const CampaignTrace* resume = nullptr) {
    CampaignConfig cfg = config;
    cfg.top_k = resolved_top_k(config, lib.size());
    validate_campaign(cfg, lib);
    const std::size_t n = lib.size();
    const auto budget = campaign_budget(cfg, n);
    const auto truth = lib.topk_truth(cfg.top_k);

    CampaignTrace trace;
    trace.config = cfg;
    trace.library_checksum = lib.checksum();
    trace.library_size = n;

    std::vector<bool> taken(n, false);
    auto absorb = [&](const std::vector<std::uint32_t>& batch) {
        for (auto i : batch) {
            if (taken[i]) throw Error(Errc::PoolExhausted, "index " + std::to_string(i) + " labelled twice");
            taken[i] = true;
        }
        trace.acquired.insert(trace.acquired.end(), batch.begin(), batch.end());
        std::sort(trace.acquired.begin(), trace.acquired.end());
    };

    if (resume && !resume->iterations.empty()) {
        if (resume->library_checksum != lib.checksum() || resume->library_size != n) {
            throw Error(Errc::ConfigInvalid, "resume trace was produced on a different library");
        }
        for (const auto& rec : resume->iterations) {
            if (rec.iteration > cfg.iterations) break;
            absorb(rec.acquired);
            trace.iterations.push_back(rec);
        }
    }

    const bool needs_model = cfg.strategy != Strategy::Random;
    std::optional<FeatureMatrix> features;
    if (needs_model && static_cast<int>(trace.iterations.size()) <= cfg.iterations) {
        features = build_features(lib, cfg.features, cfg.fingerprint, cfg.jobs);
    }

    auto record_metrics = [&](IterationRecord& rec) {
        const auto t0 = std::chrono::steady_clock::now();
        rec.explored_fraction = static_cast<double>(trace.acquired.size()) / static_cast<double>(n);
        rec.topk_retrieval = topk_retrieval(trace.acquired, truth);
        rec.enrichment_factor = enrichment_factor(rec.topk_retrieval, rec.explored_fraction);
        const bool last = rec.iteration == cfg.iterations;
        if (cfg.diversity != DiversityMode::Off && (last || cfg.diversity_each_iteration) && trace.acquired.size() >= 2) {
            std::vector<Fingerprint> fps;
            fps.reserve(trace.acquired.size());
            for (auto i : trace.acquired) fps.push_back(lib.fingerprint(i, cfg.diversity_fingerprint));
            DiceSampling sampling;
            sampling.exact_threshold = cfg.diversity == DiversityMode::Exact
                                           ? std::numeric_limits<std::size_t>::max()
                                           : cfg.diversity_threshold;
            sampling.pairs = cfg.diversity_pairs;
            sampling.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(Stream::Diversity),
                                        static_cast<std::uint64_t>(rec.iteration));
            sampling.jobs = cfg.jobs;
            rec.mean_dice = mean_pairwise_dice(fps, sampling);
        }
        rec.phases.metrics = detail::seconds_since(t0);
    };

    auto publish = [&] {
        if (on_iteration) on_iteration(trace);
    };

    if (trace.iterations.empty()) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = 0;
        rec.acquired = initial_batch(n, cfg.init_frac, cfg.seed);
        absorb(rec.acquired);
        rec.phases.select = detail::seconds_since(t0);
        record_metrics(rec);
        rec.wall_time = detail::seconds_since(t0);
        trace.iterations.push_back(std::move(rec));
        publish();
    }

    for (int it = static_cast<int>(trace.iterations.size()); it <= cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = it;

        std::vector<std::uint32_t> candidates;
        candidates.reserve(n - trace.acquired.size());
        for (std::uint32_t i = 0; i < n; ++i) {
            if (!taken[i]) candidates.push_back(i);
        }

        AcquisitionConfig acq;
        acq.strategy = cfg.strategy;
        acq.beta = cfg.beta;
        acq.batch_size = budget.batch;
        acq.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(Stream::Acquisition), static_cast<std::uint64_t>(it));

        std::vector<Prediction> predictions(candidates.size());
        if (needs_model) {
            // D_{i-1}: everything labelled so far, refit from scratch
            auto tf = std::chrono::steady_clock::now();
            std::vector<double> y;
            y.reserve(trace.acquired.size());
            for (auto i : trace.acquired) y.push_back(lib.oracle(i));
            TrainConfig train = cfg.train;
            train.mode = cfg.loss_mode();
            train.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(Stream::Model), static_cast<std::uint64_t>(it));
            train.jobs = cfg.jobs;
            auto model = make_surrogate(cfg.surrogate);
            model->fit(features->subset(trace.acquired), y, train);
            rec.phases.fit = detail::seconds_since(tf);

            auto tp = std::chrono::steady_clock::now();
            predictions = model->predict(*features, candidates, cfg.jobs);
            rec.phases.predict = detail::seconds_since(tp);
        }

        auto ts = std::chrono::steady_clock::now();
        rec.acquired = select_batch(candidates, predictions, acq);
        absorb(rec.acquired);
        rec.phases.select = detail::seconds_since(ts);

        record_metrics(rec);
        rec.wall_time = detail::seconds_since(t0);
        trace.iterations.push_back(std::move(rec));
        publish();
    }

    trace.complete = true;
    return trace;
}

} // namespace molbo

#endif
