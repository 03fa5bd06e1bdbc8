#include <gtest/gtest.h>

#include <string>

#include "molbo/config.hpp"

using namespace molbo;

namespace {

const char* kFull = R"(library:
  path: data/enamine.csv
  smiles_column: smi
  score_column: dock
  delimiter: tab
  direction: max
  strict: true
  embeddings: data/emb.bin
features:
  source: morgan
  width: 1024
  radius: 2
surrogate:
  model: mlp
  loss: nll
  split_fraction: 0.75
  patience: 4
  forest: {n_trees: 50, max_depth: 6}
  boosting: {n_trees: 80, max_leaves: 15, learning_rate: 0.05}
  mlp:
    hidden: [64, 32]
    batch_size: 16
    max_epochs: 7
acquisition:
  strategy: ucb
  beta: 10
campaign:
  init_frac: 0.02
  batch_frac: 0.03
  iterations: 3
  top_k: 500
  seeds: [4, 5]
  diversity:
    mode: exact
    each_iteration: true
    fingerprint: {kind: morgan, radius: 2, width: 1024}
  jobs: 3
output:
  dir: results
)";

std::string error_text(const std::string& yaml) {
    try {
        parse_run_config(yaml, "run.yaml");
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConfigInvalid);
        return e.what();
    }
    ADD_FAILURE() << "accepted:\n" << yaml;
    return {};
}

} // namespace

TEST(Config, Defaults) {
    const auto cfg = parse_run_config("");
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0}));
    EXPECT_EQ(cfg.campaign.iterations, 5);
    EXPECT_DOUBLE_EQ(cfg.campaign.beta, 2.0);
    EXPECT_EQ(cfg.campaign.surrogate, SurrogateKind::GradientBoosting);
    EXPECT_EQ(cfg.campaign.fingerprint, FingerprintSpec::atom_pair(1, 3, 2048));
    EXPECT_EQ(cfg.ingest.direction, Direction::Minimize);
    EXPECT_EQ(cfg.campaign.train.forest.n_trees, 100);
    EXPECT_EQ(cfg.campaign.train.forest.max_depth, 8);
    EXPECT_EQ(cfg.campaign.train.boosting.n_trees, 100);
    EXPECT_DOUBLE_EQ(cfg.campaign.train.split_fraction, 0.8);
    EXPECT_EQ(cfg.campaign.train.patience, 10);
    EXPECT_EQ(cfg.campaign.train.mlp.hidden, (std::vector<int>{256, 128}));
    EXPECT_EQ(cfg.campaign.train.mlp.batch_size, 32);
    EXPECT_EQ(cfg.campaign.train.mlp.max_epochs, 50);
    EXPECT_THROW(validate_run_config(cfg), Error);
}

TEST(Config, FullFile) {
    const auto cfg = parse_run_config(kFull, "run.yaml");
    const auto& c = cfg.campaign;
    EXPECT_EQ(cfg.library_path, "data/enamine.csv");
    EXPECT_EQ(cfg.ingest.smiles_column, "smi");
    EXPECT_EQ(cfg.ingest.score_column, "dock");
    EXPECT_EQ(cfg.ingest.delimiter, '\t');
    EXPECT_EQ(cfg.ingest.direction, Direction::Maximize);
    EXPECT_TRUE(cfg.ingest.strict);
    EXPECT_EQ(cfg.embeddings_path, "data/emb.bin");
    EXPECT_EQ(c.features, FeatureSource::MorganBits);
    EXPECT_EQ(c.fingerprint, FingerprintSpec::morgan(2, 1024));
    EXPECT_EQ(c.surrogate, SurrogateKind::FingerprintMlp);
    EXPECT_EQ(c.loss, LossChoice::Nll);
    EXPECT_DOUBLE_EQ(c.train.split_fraction, 0.75);
    EXPECT_EQ(c.train.patience, 4);
    EXPECT_EQ(c.train.forest.n_trees, 50);
    EXPECT_EQ(c.train.forest.max_depth, 6);
    EXPECT_EQ(c.train.boosting.max_leaves, 15);
    EXPECT_DOUBLE_EQ(c.train.boosting.learning_rate, 0.05);
    EXPECT_EQ(c.train.mlp.hidden, (std::vector<int>{64, 32}));
    EXPECT_EQ(c.train.mlp.batch_size, 16);
    EXPECT_EQ(c.train.mlp.max_epochs, 7);
    EXPECT_EQ(c.strategy, Strategy::Ucb);
    EXPECT_DOUBLE_EQ(c.beta, 10.0);
    EXPECT_DOUBLE_EQ(c.init_frac, 0.02);
    EXPECT_DOUBLE_EQ(c.batch_frac, 0.03);
    EXPECT_EQ(c.iterations, 3);
    EXPECT_EQ(c.top_k, 500u);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
    EXPECT_EQ(c.diversity, DiversityMode::Exact);
    EXPECT_TRUE(c.diversity_each_iteration);
    EXPECT_EQ(c.diversity_fingerprint, FingerprintSpec::morgan(2, 1024));
    EXPECT_EQ(c.jobs, 3u);
    EXPECT_EQ(cfg.out_dir, "results");
    EXPECT_NO_THROW(validate_run_config(cfg));
}

TEST(Config, ErrorsCarryLocation) {
    const auto unknown = error_text("campaign:\n  iterations: 5\n  itertions: 6\n");
    EXPECT_NE(unknown.find("run.yaml:3:"), std::string::npos) << unknown;
    EXPECT_NE(unknown.find("itertions"), std::string::npos);

    const auto bad_value = error_text("acquisition:\n  strategy: ucb\n  beta: lots\n");
    EXPECT_NE(bad_value.find("run.yaml:3:"), std::string::npos) << bad_value;

    const auto bad_enum = error_text("surrogate:\n  model: svm\n");
    EXPECT_NE(bad_enum.find("run.yaml:2:"), std::string::npos) << bad_enum;

    const auto syntax = error_text("campaign: [1, 2\n");
    EXPECT_NE(syntax.find("run.yaml:"), std::string::npos) << syntax;

    error_text("library: data.csv\n");
    error_text("campaign:\n  seed: 1\n  seeds: [2]\n");
    error_text("campaign:\n  seeds: []\n");
    error_text("library:\n  direction: sideways\n");
    error_text("surrogate:\n  mlp:\n    hidden: 64\n");
    error_text("extra: 1\n");
}

TEST(Config, DiversityShorthand) {
    EXPECT_EQ(parse_run_config("campaign:\n  diversity: off\n").campaign.diversity, DiversityMode::Off);
    EXPECT_EQ(parse_run_config("campaign:\n  seed: 9\n").seeds, (std::vector<std::uint64_t>{9}));
}

TEST(Config, EveryFlagBeatsTheFile) {
    auto cfg = parse_run_config(kFull, "run.yaml");
    RunOverrides o;
    o.library = "other.csv";
    o.score_col = "energy";
    o.smiles_col = "SMILES";
    o.direction = Direction::Minimize;
    o.features = FeatureSource::AtomPairBits;
    o.embeddings = "e.csv";
    o.surrogate = SurrogateKind::RandomForest;
    o.acquisition = Strategy::Greedy;
    o.beta = 5.0;
    o.init_frac = 0.05;
    o.batch_frac = 0.04;
    o.iterations = 2;
    o.top_k = 7;
    o.seeds = std::vector<std::uint64_t>{0, 1, 2};
    o.diversity = DiversityMode::Off;
    o.out = "elsewhere";
    o.jobs = 8;
    o.strict = false;
    apply_overrides(cfg, o);
    const auto& c = cfg.campaign;
    EXPECT_EQ(cfg.library_path, "other.csv");
    EXPECT_EQ(cfg.ingest.score_column, "energy");
    EXPECT_EQ(cfg.ingest.smiles_column, "SMILES");
    EXPECT_EQ(cfg.ingest.direction, Direction::Minimize);
    EXPECT_EQ(c.features, FeatureSource::AtomPairBits);
    EXPECT_EQ(c.fingerprint, FingerprintSpec::atom_pair(1, 3, 1024));
    EXPECT_EQ(cfg.embeddings_path, "e.csv");
    EXPECT_EQ(c.surrogate, SurrogateKind::RandomForest);
    EXPECT_EQ(c.strategy, Strategy::Greedy);
    EXPECT_DOUBLE_EQ(c.beta, 5.0);
    EXPECT_DOUBLE_EQ(c.init_frac, 0.05);
    EXPECT_DOUBLE_EQ(c.batch_frac, 0.04);
    EXPECT_EQ(c.iterations, 2);
    EXPECT_EQ(c.top_k, 7u);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
    EXPECT_EQ(c.diversity, DiversityMode::Off);
    EXPECT_EQ(cfg.out_dir, "elsewhere");
    EXPECT_EQ(c.jobs, 8u);
    EXPECT_FALSE(cfg.ingest.strict);

    const auto j = run_config_json(cfg);
    EXPECT_EQ(j["campaign"]["acquisition"]["beta"], 5.0);
    EXPECT_EQ(j["campaign"]["jobs"], 8);
    EXPECT_EQ(j["seeds"], nlohmann::json::array({0, 1, 2}));
    EXPECT_EQ(j["library"]["path"], "other.csv");
    EXPECT_FALSE(j["campaign"].contains("seed"));
}

TEST(Config, Validation) {
    auto cfg = parse_run_config("library:\n  path: x.csv\nfeatures:\n  source: embedding\n");
    EXPECT_THROW(validate_run_config(cfg), Error);
    cfg.embeddings_path = "e.bin";
    EXPECT_NO_THROW(validate_run_config(cfg));
    cfg.campaign.jobs = 0;
    EXPECT_THROW(validate_run_config(cfg), Error);
    const auto oracle = parse_run_config("features:\n  source: oracle\nlibrary:\n  path: x\n");
    EXPECT_EQ(oracle.campaign.features, FeatureSource::OracleUtility);
    EXPECT_THROW(validate_run_config(oracle), Error);
}

TEST(Config, SeedLists) {
    EXPECT_EQ(parse_seed_list("0,1,2"), (std::vector<std::uint64_t>{0, 1, 2}));
    EXPECT_EQ(parse_seed_list("7"), (std::vector<std::uint64_t>{7}));
    EXPECT_EQ(parse_seed_list(" 3 , 4"), (std::vector<std::uint64_t>{3, 4}));
    EXPECT_THROW(parse_seed_list("1,,2"), Error);
    EXPECT_THROW(parse_seed_list("a"), Error);
    EXPECT_THROW(parse_seed_list(""), Error);
}
