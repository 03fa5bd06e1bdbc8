#ifndef MOLBO_SURROGATE_SURROGATE_HPP
#define MOLBO_SURROGATE_SURROGATE_HPP

#include <istream>
#include <memory>
#include <ostream>
#include <string>

#include "molbo/surrogate/common.hpp"
#include "molbo/surrogate/gradient_boosting.hpp"
#include "molbo/surrogate/mlp.hpp"
#include "molbo/surrogate/random_forest.hpp"

namespace molbo {

/// Reads the utility straight out of an oracle-utility feature column.
/// A perfect model, for harness checks against closed-form campaign outcomes.
class OracleSurrogate final : public Surrogate {
public:
    SurrogateKind kind() const noexcept override { return SurrogateKind::Oracle; }

protected:
    void do_fit(const FeatureMatrix& x, std::span<const double>, const TrainConfig&) override {
        if (x.source() != FeatureSource::OracleUtility) {
            throw Error(Errc::ConfigInvalid, "oracle surrogate needs oracle-utility features");
        }
    }
    Prediction predict_row(const FeatureMatrix& x, std::size_t row) const override {
        return {x.dense_row(row)[0], 0.0};
    }
    nlohmann::json save_state() const override { return nlohmann::json::object(); }
    void load_state(const nlohmann::json&) override {}
};

inline std::unique_ptr<Surrogate> make_surrogate(SurrogateKind kind) {
    switch (kind) {
    case SurrogateKind::RandomForest: return std::make_unique<RandomForest>();
    case SurrogateKind::GradientBoosting: return std::make_unique<GradientBoostedTrees>();
    case SurrogateKind::FingerprintMlp: return std::make_unique<Mlp>(SurrogateKind::FingerprintMlp);
    case SurrogateKind::EmbeddingMlp: return std::make_unique<Mlp>(SurrogateKind::EmbeddingMlp);
    case SurrogateKind::Oracle: return std::make_unique<OracleSurrogate>();
    }
    throw Error(Errc::ConfigInvalid, "unknown surrogate kind");
}

inline SurrogateKind parse_surrogate_kind(const std::string& name) {
    for (auto k : {SurrogateKind::RandomForest, SurrogateKind::GradientBoosting, SurrogateKind::FingerprintMlp,
                   SurrogateKind::EmbeddingMlp, SurrogateKind::Oracle}) {
        if (surrogate_kind_name(k) == name) return k;
    }
    throw Error(Errc::ConfigInvalid, "unknown surrogate '" + name + "'");
}

/// Neural models learn a variance only when trained on the NLL loss; tree
/// ensembles are always trained on squared error.
inline bool is_neural(SurrogateKind k) {
    return k == SurrogateKind::FingerprintMlp || k == SurrogateKind::EmbeddingMlp;
}

/// Versioned JSON checkpoint ("molbo-surrogate", version 1).
inline void save_surrogate(std::ostream& out, const Surrogate& model) {
    if (!model.trained()) throw Error(Errc::Untrained, "cannot checkpoint an untrained model");
    out << model.to_json().dump() << '\n';
}

inline std::unique_ptr<Surrogate> load_surrogate(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Io, std::string("unreadable model checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "molbo-surrogate" || j.value("version", 0) != 1) {
        throw Error(Errc::Io, "not a version-1 molbo surrogate checkpoint");
    }
    auto model = make_surrogate(parse_surrogate_kind(j.at("kind").get<std::string>()));
    model->restore(j);
    return model;
}

} // namespace molbo

#endif
