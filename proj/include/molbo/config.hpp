#ifndef MOLBO_CONFIG_HPP
#define MOLBO_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "molbo/campaign.hpp"
#include "molbo/error.hpp"
#include "molbo/library.hpp"
#include "molbo/trace.hpp"

namespace molbo {

/// Everything one `molbo run` needs: where the data lives, the campaign,
/// the seed list and the output directory.
struct RunConfig {
    std::string library_path;
    IngestOptions ingest;
    std::string embeddings_path;
    CampaignConfig campaign;
    std::vector<std::uint64_t> seeds = {0};
    std::string out_dir = "molbo-out";
};

/// Command-line values; each set field replaces the file value.
struct RunOverrides {
    std::optional<std::string> library;
    std::optional<std::string> score_col;
    std::optional<std::string> smiles_col;
    std::optional<Direction> direction;
    std::optional<FeatureSource> features;
    std::optional<std::string> embeddings;
    std::optional<SurrogateKind> surrogate;
    std::optional<Strategy> acquisition;
    std::optional<double> beta;
    std::optional<double> init_frac;
    std::optional<double> batch_frac;
    std::optional<int> iterations;
    std::optional<std::size_t> top_k;
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<DiversityMode> diversity;
    std::optional<std::string> out;
    std::optional<unsigned> jobs;
    std::optional<bool> strict;
};

inline std::string_view direction_name(Direction d) { return d == Direction::Minimize ? "min" : "max"; }

inline Direction parse_direction(std::string_view s) {
    if (s == "min" || s == "minimize") return Direction::Minimize;
    if (s == "max" || s == "maximize") return Direction::Maximize;
    throw Error(Errc::ConfigInvalid, "direction must be min or max, got '" + std::string(s) + "'");
}

/// CLI spelling of a feature source.
inline std::string_view feature_flag_name(FeatureSource s) {
    switch (s) {
    case FeatureSource::AtomPairBits: return "atom-pair";
    case FeatureSource::MorganBits: return "morgan";
    case FeatureSource::ExternalEmbedding: return "embedding";
    case FeatureSource::OracleUtility: return "oracle";
    }
    return "unknown";
}

inline FeatureSource parse_feature_source(std::string_view s) {
    for (auto f : {FeatureSource::AtomPairBits, FeatureSource::MorganBits, FeatureSource::ExternalEmbedding,
                   FeatureSource::OracleUtility}) {
        if (feature_flag_name(f) == s) return f;
    }
    throw Error(Errc::ConfigInvalid, "unknown feature source '" + std::string(s) + "'");
}

inline LossChoice parse_loss_choice(std::string_view s) {
    for (auto c : {LossChoice::Auto, LossChoice::Mse, LossChoice::Nll}) {
        if (loss_choice_name(c) == s) return c;
    }
    throw Error(Errc::ConfigInvalid, "loss must be auto, mse or nll, got '" + std::string(s) + "'");
}

/// Comma-separated seed list, e.g. "0,1,2".
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string_view::npos) end = text.size();
        std::uint64_t v = 0;
        if (!detail::parse_index(detail::trim(text.substr(start, end - start)), v)) {
            throw Error(Errc::ConfigInvalid, "bad seed list '" + std::string(text) + "'");
        }
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
        const auto m = node.Mark();
        std::string where = source_;
        if (!m.is_null()) where += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
        throw Error(Errc::ConfigInvalid, where + ": " + msg);
    }

    void require_map(const YAML::Node& node, const std::string& name) const {
        if (!node.IsMap()) fail(node, "'" + name + "' must be a mapping");
    }

    void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<std::string_view> keys) const {
        require_map(node, section);
        std::set<std::string_view> allowed(keys);
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& key) const {
        if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, "bad value '" + node.Scalar() + "' for '" + key + "'");
        }
    }

    template <class T>
    void read(const YAML::Node& map, const char* key, T& out) const {
        if (auto n = map[key]) out = scalar<T>(n, key);
    }

    template <class Fn>
    void read_enum(const YAML::Node& map, const char* key, Fn&& parse) const {
        if (auto n = map[key]) {
            const auto text = scalar<std::string>(n, key);
            try {
                parse(text);
            } catch (const Error& e) {
                fail(n, e.what());
            }
        }
    }

private:
    std::string source_;
};

inline void read_fingerprint_spec(const ConfigReader& r, const YAML::Node& node, const std::string& section,
                                  FingerprintSpec& spec) {
    r.check_keys(node, section, {"kind", "width", "radius", "min_distance", "max_distance"});
    r.read_enum(node, "kind", [&](const std::string& s) {
        if (s == "morgan") spec.kind = FingerprintKind::Morgan;
        else if (s == "atom-pair") spec.kind = FingerprintKind::AtomPair;
        else throw Error(Errc::ConfigInvalid, "fingerprint kind must be morgan or atom-pair");
    });
    if (spec.kind == FingerprintKind::Morgan) {
        spec.min_radius = 0;
        r.read(node, "radius", spec.max_radius);
    } else {
        r.read(node, "min_distance", spec.min_radius);
        r.read(node, "max_distance", spec.max_radius);
    }
    r.read(node, "width", spec.width);
}

} // namespace detail

/// Parses a YAML run config. Errors name the source and line.
inline RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>") {
    detail::ConfigReader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw Error(Errc::ConfigInvalid, source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    RunConfig cfg;
    if (root.IsNull()) return cfg;
    r.check_keys(root, "top level", {"library", "features", "surrogate", "acquisition", "campaign", "output"});

    if (auto lib = root["library"]) {
        r.check_keys(lib, "library",
                     {"path", "smiles_column", "score_column", "delimiter", "direction", "strict", "embeddings"});
        r.read(lib, "path", cfg.library_path);
        r.read(lib, "smiles_column", cfg.ingest.smiles_column);
        r.read(lib, "score_column", cfg.ingest.score_column);
        r.read_enum(lib, "delimiter", [&](const std::string& s) {
            if (s == "\\t" || s == "tab") cfg.ingest.delimiter = '\t';
            else if (s.size() == 1) cfg.ingest.delimiter = s[0];
            else throw Error(Errc::ConfigInvalid, "delimiter must be one character");
        });
        r.read_enum(lib, "direction", [&](const std::string& s) { cfg.ingest.direction = parse_direction(s); });
        r.read(lib, "strict", cfg.ingest.strict);
        r.read(lib, "embeddings", cfg.embeddings_path);
    }

    auto& c = cfg.campaign;
    if (auto f = root["features"]) {
        r.check_keys(f, "features", {"source", "width", "radius", "min_distance", "max_distance"});
        r.read_enum(f, "source", [&](const std::string& s) { c.features = parse_feature_source(s); });
        c.fingerprint = c.features == FeatureSource::MorganBits ? FingerprintSpec::morgan(3, 2048)
                                                                 : FingerprintSpec::atom_pair(1, 3, 2048);
        r.read(f, "width", c.fingerprint.width);
        if (c.features == FeatureSource::MorganBits) {
            r.read(f, "radius", c.fingerprint.max_radius);
        } else {
            r.read(f, "min_distance", c.fingerprint.min_radius);
            r.read(f, "max_distance", c.fingerprint.max_radius);
        }
    }

    if (auto s = root["surrogate"]) {
        r.check_keys(s, "surrogate", {"model", "loss", "split_fraction", "patience", "forest", "boosting", "mlp"});
        r.read_enum(s, "model", [&](const std::string& v) { c.surrogate = parse_surrogate_kind(v); });
        r.read_enum(s, "loss", [&](const std::string& v) { c.loss = parse_loss_choice(v); });
        r.read(s, "split_fraction", c.train.split_fraction);
        r.read(s, "patience", c.train.patience);
        if (auto fo = s["forest"]) {
            r.check_keys(fo, "surrogate.forest", {"n_trees", "max_depth", "min_samples_leaf", "bootstrap", "max_features"});
            r.read(fo, "n_trees", c.train.forest.n_trees);
            r.read(fo, "max_depth", c.train.forest.max_depth);
            r.read(fo, "min_samples_leaf", c.train.forest.min_samples_leaf);
            r.read(fo, "bootstrap", c.train.forest.bootstrap);
            r.read(fo, "max_features", c.train.forest.max_features);
        }
        if (auto b = s["boosting"]) {
            r.check_keys(b, "surrogate.boosting", {"n_trees", "max_depth", "max_leaves", "min_samples_leaf", "learning_rate"});
            r.read(b, "n_trees", c.train.boosting.n_trees);
            r.read(b, "max_depth", c.train.boosting.max_depth);
            r.read(b, "max_leaves", c.train.boosting.max_leaves);
            r.read(b, "min_samples_leaf", c.train.boosting.min_samples_leaf);
            r.read(b, "learning_rate", c.train.boosting.learning_rate);
        }
        if (auto m = s["mlp"]) {
            r.check_keys(m, "surrogate.mlp", {"hidden", "learning_rate", "batch_size", "max_epochs"});
            if (auto h = m["hidden"]) {
                if (!h.IsSequence()) r.fail(h, "'hidden' must be a list of layer widths");
                c.train.mlp.hidden.clear();
                for (const auto& w : h) c.train.mlp.hidden.push_back(r.scalar<int>(w, "hidden"));
            }
            r.read(m, "learning_rate", c.train.mlp.learning_rate);
            r.read(m, "batch_size", c.train.mlp.batch_size);
            r.read(m, "max_epochs", c.train.mlp.max_epochs);
        }
    }

    if (auto a = root["acquisition"]) {
        r.check_keys(a, "acquisition", {"strategy", "beta"});
        r.read_enum(a, "strategy", [&](const std::string& v) { c.strategy = parse_strategy(v); });
        r.read(a, "beta", c.beta);
    }

    if (auto k = root["campaign"]) {
        r.check_keys(k, "campaign", {"init_frac", "batch_frac", "iterations", "top_k", "seed", "seeds", "diversity", "jobs"});
        r.read(k, "init_frac", c.init_frac);
        r.read(k, "batch_frac", c.batch_frac);
        r.read(k, "iterations", c.iterations);
        r.read(k, "top_k", c.top_k);
        r.read(k, "jobs", c.jobs);
        if (k["seed"] && k["seeds"]) r.fail(k["seeds"], "give either 'seed' or 'seeds', not both");
        if (auto s = k["seed"]) cfg.seeds = {r.scalar<std::uint64_t>(s, "seed")};
        if (auto s = k["seeds"]) {
            if (!s.IsSequence() || s.size() == 0) r.fail(s, "'seeds' must be a non-empty list");
            cfg.seeds.clear();
            for (const auto& v : s) cfg.seeds.push_back(r.scalar<std::uint64_t>(v, "seeds"));
        }
        if (auto d = k["diversity"]) {
            if (d.IsScalar()) {
                r.read_enum(k, "diversity", [&](const std::string& v) { c.diversity = parse_diversity_mode(v); });
            } else {
                r.check_keys(d, "campaign.diversity", {"mode", "threshold", "pairs", "fingerprint", "each_iteration"});
                r.read_enum(d, "mode", [&](const std::string& v) { c.diversity = parse_diversity_mode(v); });
                r.read(d, "threshold", c.diversity_threshold);
                r.read(d, "pairs", c.diversity_pairs);
                r.read(d, "each_iteration", c.diversity_each_iteration);
                if (auto fp = d["fingerprint"]) {
                    detail::read_fingerprint_spec(r, fp, "campaign.diversity.fingerprint", c.diversity_fingerprint);
                }
            }
        }
    }

    if (auto o = root["output"]) {
        r.check_keys(o, "output", {"dir"});
        r.read(o, "dir", cfg.out_dir);
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigInvalid, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path);
}

inline void apply_overrides(RunConfig& cfg, const RunOverrides& o) {
    auto& c = cfg.campaign;
    if (o.library) cfg.library_path = *o.library;
    if (o.score_col) cfg.ingest.score_column = *o.score_col;
    if (o.smiles_col) cfg.ingest.smiles_column = *o.smiles_col;
    if (o.direction) cfg.ingest.direction = *o.direction;
    if (o.features && *o.features != c.features) {
        c.features = *o.features;
        if (c.features == FeatureSource::MorganBits) c.fingerprint = FingerprintSpec::morgan(3, c.fingerprint.width);
        if (c.features == FeatureSource::AtomPairBits) c.fingerprint = FingerprintSpec::atom_pair(1, 3, c.fingerprint.width);
    }
    if (o.embeddings) cfg.embeddings_path = *o.embeddings;
    if (o.surrogate) c.surrogate = *o.surrogate;
    if (o.acquisition) c.strategy = *o.acquisition;
    if (o.beta) c.beta = *o.beta;
    if (o.init_frac) c.init_frac = *o.init_frac;
    if (o.batch_frac) c.batch_frac = *o.batch_frac;
    if (o.iterations) c.iterations = *o.iterations;
    if (o.top_k) c.top_k = *o.top_k;
    if (o.seeds) cfg.seeds = *o.seeds;
    if (o.diversity) c.diversity = *o.diversity;
    if (o.out) cfg.out_dir = *o.out;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.strict) cfg.ingest.strict = *o.strict;
}

/// Checks that do not need the library loaded.
inline void validate_run_config(const RunConfig& cfg) {
    if (cfg.library_path.empty()) throw Error(Errc::ConfigInvalid, "no library path given (library.path or --library)");
    if (cfg.seeds.empty()) throw Error(Errc::ConfigInvalid, "seed list is empty");
    if (cfg.campaign.features == FeatureSource::ExternalEmbedding && cfg.embeddings_path.empty()) {
        throw Error(Errc::ConfigInvalid, "embedding features need an embeddings file (library.embeddings or --embeddings)");
    }
    if (cfg.campaign.jobs < 1) throw Error(Errc::ConfigInvalid, "jobs must be >= 1");
    if (cfg.campaign.features == FeatureSource::OracleUtility) {
        throw Error(Errc::ConfigInvalid, "oracle features are a diagnostic and not available from the command line");
    }
}

/// The resolved config as recorded in run manifests.
inline nlohmann::json run_config_json(const RunConfig& cfg) {
    nlohmann::json j;
    std::string delim(1, cfg.ingest.delimiter);
    j["library"] = {{"path", cfg.library_path},
                    {"smiles_column", cfg.ingest.smiles_column},
                    {"score_column", cfg.ingest.score_column},
                    {"delimiter", delim},
                    {"direction", direction_name(cfg.ingest.direction)},
                    {"strict", cfg.ingest.strict},
                    {"embeddings", cfg.embeddings_path}};
    j["campaign"] = campaign_config_json(cfg.campaign);
    j["campaign"].erase("seed");
    j["campaign"]["jobs"] = cfg.campaign.jobs;
    j["seeds"] = cfg.seeds;
    j["output"] = {{"dir", cfg.out_dir}};
    return j;
}

} // namespace molbo

#endif
