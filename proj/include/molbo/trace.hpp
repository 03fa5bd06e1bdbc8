#ifndef MOLBO_TRACE_HPP
#define MOLBO_TRACE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "molbo/campaign.hpp"
#include "molbo/error.hpp"
#include "molbo/library.hpp"

namespace molbo {

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::uint64_t parse_hex64(const std::string& s) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used, 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw Error(Errc::Io, "bad hex checksum '" + s + "'");
    return v;
}

inline nlohmann::json fingerprint_spec_json(const FingerprintSpec& s) {
    nlohmann::json j;
    j["kind"] = s.kind == FingerprintKind::Morgan ? "morgan" : "atom-pair";
    j["width"] = s.width;
    if (s.kind == FingerprintKind::Morgan) {
        j["radius"] = s.max_radius;
    } else {
        j["min_distance"] = s.min_radius;
        j["max_distance"] = s.max_radius;
    }
    return j;
}

inline std::string_view loss_choice_name(LossChoice c) {
    switch (c) {
    case LossChoice::Auto: return "auto";
    case LossChoice::Mse: return "mse";
    case LossChoice::Nll: return "nll";
    }
    return "unknown";
}

/// Every field that influences the campaign, in a fixed key order.
inline nlohmann::json campaign_config_json(const CampaignConfig& c) {
    nlohmann::json j;
    j["features"] = feature_source_name(c.features);
    j["fingerprint"] = fingerprint_spec_json(c.fingerprint);
    j["surrogate"] = surrogate_kind_name(c.surrogate);
    j["loss"] = loss_choice_name(c.loss);
    j["resolved_loss"] = c.loss_mode() == LossMode::Nll ? "nll" : "mse";
    const auto& t = c.train;
    j["train"] = {
        {"split_fraction", t.split_fraction},
        {"patience", t.patience},
        {"forest",
         {{"n_trees", t.forest.n_trees},
          {"max_depth", t.forest.max_depth},
          {"min_samples_leaf", t.forest.min_samples_leaf},
          {"bootstrap", t.forest.bootstrap},
          {"max_features", t.forest.max_features}}},
        {"boosting",
         {{"n_trees", t.boosting.n_trees},
          {"max_depth", t.boosting.max_depth},
          {"max_leaves", t.boosting.max_leaves},
          {"min_samples_leaf", t.boosting.min_samples_leaf},
          {"learning_rate", t.boosting.learning_rate}}},
        {"mlp",
         {{"hidden", t.mlp.hidden},
          {"learning_rate", t.mlp.learning_rate},
          {"batch_size", t.mlp.batch_size},
          {"max_epochs", t.mlp.max_epochs}}},
    };
    j["acquisition"] = {{"strategy", strategy_name(c.strategy)}, {"beta", c.beta}};
    j["init_frac"] = c.init_frac;
    j["batch_frac"] = c.batch_frac;
    j["iterations"] = c.iterations;
    j["top_k"] = c.top_k;
    j["seed"] = c.seed;
    j["diversity"] = {{"mode", diversity_mode_name(c.diversity)},
                      {"threshold", c.diversity_threshold},
                      {"pairs", c.diversity_pairs},
                      {"fingerprint", fingerprint_spec_json(c.diversity_fingerprint)},
                      {"each_iteration", c.diversity_each_iteration}};
    return j;
}

inline nlohmann::json iteration_json(const IterationRecord& r) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["explored_fraction"] = r.explored_fraction;
    j["topk_retrieval"] = r.topk_retrieval;
    j["enrichment_factor"] = r.enrichment_factor;
    j["mean_dice"] = r.mean_dice ? nlohmann::json(*r.mean_dice) : nlohmann::json(nullptr);
    j["acquired"] = r.acquired;
    return j;
}

/// Deterministic trace document. Timings are excluded so equal configs give
/// byte-equal files; see write_timings_csv.
inline nlohmann::json trace_json(const CampaignTrace& t) {
    nlohmann::json j;
    j["format"] = "molbo-trace";
    j["version"] = 1;
    j["complete"] = t.complete;
    j["library"] = {{"size", t.library_size}, {"checksum", hex64(t.library_checksum)}};
    j["config"] = campaign_config_json(t.config);
    auto& its = j["iterations"] = nlohmann::json::array();
    for (const auto& r : t.iterations) its.push_back(iteration_json(r));
    if (!t.iterations.empty()) {
        const auto& last = t.iterations.back();
        j["final"] = {{"iteration", last.iteration},
                      {"acquired_count", t.acquired.size()},
                      {"explored_fraction", last.explored_fraction},
                      {"topk_retrieval", last.topk_retrieval},
                      {"enrichment_factor", last.enrichment_factor},
                      {"mean_dice", last.mean_dice ? nlohmann::json(*last.mean_dice) : nlohmann::json(nullptr)}};
    }
    return j;
}

inline void write_trace(std::ostream& out, const CampaignTrace& t) { out << trace_json(t).dump(2) << '\n'; }

/// Rebuilds the records of a trace document (for resume). The config is
/// not parsed back; callers compare `campaign_config_json` for equality.
inline CampaignTrace read_trace(std::istream& in, nlohmann::json* config_out = nullptr) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Io, std::string("unreadable trace: ") + e.what());
    }
    if (j.value("format", "") != "molbo-trace" || j.value("version", 0) != 1) {
        throw Error(Errc::Io, "not a molbo-trace version 1 document");
    }
    CampaignTrace t;
    try {
        t.complete = j.at("complete").get<bool>();
        t.library_size = j.at("library").at("size").get<std::size_t>();
        t.library_checksum = parse_hex64(j.at("library").at("checksum").get<std::string>());
        for (const auto& r : j.at("iterations")) {
            IterationRecord rec;
            rec.iteration = r.at("iteration").get<int>();
            rec.explored_fraction = r.at("explored_fraction").get<double>();
            rec.topk_retrieval = r.at("topk_retrieval").get<double>();
            rec.enrichment_factor = r.at("enrichment_factor").get<double>();
            if (!r.at("mean_dice").is_null()) rec.mean_dice = r.at("mean_dice").get<double>();
            rec.acquired = r.at("acquired").get<std::vector<std::uint32_t>>();
            t.acquired.insert(t.acquired.end(), rec.acquired.begin(), rec.acquired.end());
            t.iterations.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Io, std::string("malformed trace: ") + e.what());
    }
    std::sort(t.acquired.begin(), t.acquired.end());
    if (config_out) *config_out = j.at("config");
    return t;
}

namespace detail {

inline std::string fmt_real(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

} // namespace detail

/// iteration,explored_fraction,topk_retrieval,ef,mean_dice
inline void write_iteration_table(std::ostream& out, const CampaignTrace& t) {
    out << "iteration,explored_fraction,topk_retrieval,ef,mean_dice\n";
    for (const auto& r : t.iterations) {
        out << r.iteration << ',' << detail::fmt_real(r.explored_fraction) << ',' << detail::fmt_real(r.topk_retrieval)
            << ',' << detail::fmt_real(r.enrichment_factor) << ','
            << (r.mean_dice ? detail::fmt_real(*r.mean_dice) : std::string()) << '\n';
    }
}

/// index,smiles,score,iteration_acquired
inline void write_acquired(std::ostream& out, const CampaignTrace& t, const Library& lib) {
    out << "index,smiles,score,iteration_acquired\n";
    for (const auto& r : t.iterations) {
        for (auto i : r.acquired) {
            out << i << ',' << lib.smiles(i) << ',' << detail::fmt_real(lib.score(i)) << ',' << r.iteration << '\n';
        }
    }
}

inline void write_timings_csv(std::ostream& out, const CampaignTrace& t) {
    out << "iteration,wall_time,fit,predict,select,metrics\n";
    for (const auto& r : t.iterations) {
        out << r.iteration << ',' << detail::fmt_real(r.wall_time) << ',' << detail::fmt_real(r.phases.fit) << ','
            << detail::fmt_real(r.phases.predict) << ',' << detail::fmt_real(r.phases.select) << ','
            << detail::fmt_real(r.phases.metrics) << '\n';
    }
}

struct AggregateRow {
    int iteration = 0;
    std::size_t runs = 0;
    double explored_fraction = 0.0;
    double retrieval_mean = 0.0, retrieval_std = 0.0;
    double ef_mean = 0.0, ef_std = 0.0;
    std::optional<double> dice_mean, dice_std;
};

namespace detail {

/// Sample standard deviation (n-1); 0 for a single run.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

} // namespace detail

/// Per-iteration mean and sample standard deviation across seeded runs.
inline std::vector<AggregateRow> aggregate_traces(const std::vector<CampaignTrace>& traces) {
    std::map<int, std::vector<const IterationRecord*>> by_iter;
    for (const auto& t : traces) {
        for (const auto& r : t.iterations) by_iter[r.iteration].push_back(&r);
    }
    std::vector<AggregateRow> rows;
    for (const auto& [it, recs] : by_iter) {
        AggregateRow row;
        row.iteration = it;
        row.runs = recs.size();
        std::vector<double> ret, ef, dice, frac;
        for (const auto* r : recs) {
            ret.push_back(r->topk_retrieval);
            ef.push_back(r->enrichment_factor);
            frac.push_back(r->explored_fraction);
            if (r->mean_dice) dice.push_back(*r->mean_dice);
        }
        row.explored_fraction = detail::mean_std(frac).first;
        std::tie(row.retrieval_mean, row.retrieval_std) = detail::mean_std(ret);
        std::tie(row.ef_mean, row.ef_std) = detail::mean_std(ef);
        if (!dice.empty()) {
            auto [m, s] = detail::mean_std(dice);
            row.dice_mean = m;
            row.dice_std = s;
        }
        rows.push_back(row);
    }
    return rows;
}

inline void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << "iteration,runs,explored_fraction,topk_retrieval_mean,topk_retrieval_std,ef_mean,ef_std,mean_dice_mean,"
           "mean_dice_std\n";
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.runs << ',' << detail::fmt_real(r.explored_fraction) << ','
            << detail::fmt_real(r.retrieval_mean) << ',' << detail::fmt_real(r.retrieval_std) << ','
            << detail::fmt_real(r.ef_mean) << ',' << detail::fmt_real(r.ef_std) << ','
            << (r.dice_mean ? detail::fmt_real(*r.dice_mean) : std::string()) << ','
            << (r.dice_std ? detail::fmt_real(*r.dice_std) : std::string()) << '\n';
    }
}

/// Writes `content` to `path` through a sibling temporary and a rename, so a
/// crash never leaves a truncated file behind.
template <class Fn>
void write_file_atomic(const std::filesystem::path& path, Fn&& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
        content(out);
        out.flush();
        if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

} // namespace molbo

#endif
