#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "molbo/rng.hpp"
#include "molbo/surrogate/surrogate.hpp"

using namespace molbo;

namespace {

FeatureMatrix random_bits(std::size_t n, std::uint32_t d, std::uint64_t seed, double density = 0.2) {
    Rng rng(seed);
    std::vector<std::vector<std::uint32_t>> rows(n);
    for (auto& r : rows) {
        for (std::uint32_t c = 0; c < d; ++c) {
            if (rng.uniform01() < density) r.push_back(c);
        }
    }
    return FeatureMatrix::from_bits(std::move(rows), d, FeatureSource::AtomPairBits);
}

FeatureMatrix random_dense(std::size_t n, std::uint32_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n * d);
    for (auto& x : v) x = rng.normal();
    return FeatureMatrix::from_dense(n, d, std::move(v), FeatureSource::ExternalEmbedding);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.forest.n_trees = 20;
    cfg.boosting.n_trees = 20;
    cfg.mlp.hidden = {16, 8};
    cfg.mlp.max_epochs = 10;
    return cfg;
}

double r_squared(const std::vector<Prediction>& p, const std::vector<double>& y) {
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - p[i].mean) * (y[i] - p[i].mean);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - ss_res / ss_tot;
}

} // namespace

TEST(Loss, NllValues) {
    EXPECT_NEAR(nll_loss(0, 0, 1), 0.0, 1e-12);
    EXPECT_NEAR(nll_loss(1, 0, 1), 0.5, 1e-12);
    EXPECT_NEAR(nll_loss(0, 0, 1e-6), -5.756463, 1e-6);
    EXPECT_NEAR(nll_loss(0, 0, 1e-6), 0.5 * std::log(1e-5), 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.normal() * 3.0;
        const double m = rng.normal() * 3.0;
        const double s = std::log(1e-4) + rng.uniform01() * 8.0;
        const auto g = nll_gradient(y, m, s);
        const double h = 1e-5;
        const double dm = (nll_loss(y, m + h, std::exp(s)) - nll_loss(y, m - h, std::exp(s))) / (2 * h);
        const double ds = (nll_loss(y, m, std::exp(s + h)) - nll_loss(y, m, std::exp(s - h))) / (2 * h);
        EXPECT_NEAR(g.d_mean, dm, 1e-5 * std::max(1.0, std::abs(dm)));
        EXPECT_NEAR(g.d_log_var, ds, 1e-5 * std::max(1.0, std::abs(ds)));
    }
}

TEST(Ensemble, PopulationVariance) {
    EXPECT_DOUBLE_EQ(ensemble_variance(std::vector<double>{2, 2, 2}), 0.0);
    EXPECT_DOUBLE_EQ(ensemble_variance(std::vector<double>{1, 3}), 1.0);
    EXPECT_DOUBLE_EQ(ensemble_variance(std::vector<double>{1, 2, 3, 4}), 1.25);
    try {
        ensemble_variance(std::vector<double>{1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::TooFewMembers);
    }
}

TEST(EarlyStopping, IncreasingLossStopsAtEleven) {
    EarlyStopping stop(10);
    int epoch = 0;
    for (double loss = 1.0;; loss += 0.1) {
        ++epoch;
        if (stop.observe(loss)) break;
        ASSERT_LT(epoch, 100);
    }
    EXPECT_EQ(epoch, 11);
    EXPECT_EQ(stop.best_epoch(), 1);
}

TEST(EarlyStopping, ImprovementResetsPatience) {
    EarlyStopping stop(2);
    EXPECT_FALSE(stop.observe(5));
    EXPECT_FALSE(stop.observe(6));
    EXPECT_FALSE(stop.observe(4));
    EXPECT_FALSE(stop.observe(4));
    EXPECT_TRUE(stop.observe(7));
    EXPECT_EQ(stop.best_epoch(), 3);
}

TEST(Split, EightyTwenty) {
    EXPECT_EQ(split_sizes(100, 0.8), (std::pair<std::size_t, std::size_t>{80, 20}));
    EXPECT_EQ(split_sizes(5, 0.8), (std::pair<std::size_t, std::size_t>{4, 1}));
    const auto x = random_bits(100, 32, 1);
    std::vector<double> y(100);
    Rng rng(2);
    for (auto& v : y) v = rng.normal();
    Mlp mlp;
    mlp.fit(x, y, small_config());
    EXPECT_EQ(mlp.train_rows(), 80u);
    EXPECT_EQ(mlp.validation_rows(), 20u);
}

TEST(Surrogate, ConstantTargets) {
    const auto x = random_bits(40, 16, 3);
    const std::vector<double> y(40, 4.25);
    for (auto kind : {SurrogateKind::RandomForest, SurrogateKind::GradientBoosting, SurrogateKind::FingerprintMlp}) {
        for (auto mode : {LossMode::Mse, LossMode::Nll}) {
            auto model = make_surrogate(kind);
            auto cfg = small_config();
            cfg.mode = mode;
            model->fit(x, y, cfg);
            for (const auto& p : model->predict(x)) {
                EXPECT_NEAR(p.mean, 4.25, 1e-6);
                if (kind != SurrogateKind::FingerprintMlp) {
                    EXPECT_EQ(p.variance, 0.0);
                }
                EXPECT_GE(p.variance, 0.0);
            }
        }
    }
}

TEST(Surrogate, FitPreconditions) {
    const auto x = random_bits(4, 8, 1);
    RandomForest rf;
    try {
        rf.fit(x, std::vector<double>{1, 2, 3, 4}, small_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::TooFewSamples);
    }
    const auto x6 = random_bits(6, 8, 1);
    try {
        rf.fit(x6, std::vector<double>{1, 2, 3, 4, 5, std::nan("")}, small_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonFiniteTarget);
    }
    try {
        rf.predict(x6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Untrained);
    }
    rf.fit(x6, std::vector<double>{1, 2, 3, 4, 5, 6}, small_config());
    try {
        rf.predict(random_bits(3, 16, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
    auto bad = small_config();
    bad.split_fraction = 1.0;
    EXPECT_THROW(rf.fit(x6, std::vector<double>{1, 2, 3, 4, 5, 6}, bad), Error);
    bad = small_config();
    bad.patience = 0;
    EXPECT_THROW(rf.fit(x6, std::vector<double>{1, 2, 3, 4, 5, 6}, bad), Error);
}

TEST(RandomForest, SingleTreeMemorizes) {
    const auto x = random_dense(120, 4, 8);
    std::vector<double> y(120);
    Rng rng(9);
    for (auto& v : y) v = rng.normal();
    TrainConfig cfg;
    cfg.forest.n_trees = 1;
    cfg.forest.max_depth = 0;
    cfg.forest.bootstrap = false;
    cfg.forest.max_features = 4;
    RandomForest rf;
    rf.fit(x, y, cfg);
    const auto p = rf.predict(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_DOUBLE_EQ(p[i].mean, y[i]);
        EXPECT_EQ(p[i].variance, 0.0);
    }
}

TEST(RandomForest, LinearSignalHeldOut) {
    const std::size_t n = 3000, d = 32;
    const auto x = random_dense(n, d, 10);
    Rng rng(11);
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::uint32_t c = 0; c < d; ++c) s += w[c] * x.value(i, c);
        y[i] = s + 0.5 * rng.normal();
    }
    std::vector<std::uint32_t> train(2000), test(1000);
    std::iota(train.begin(), train.end(), 0u);
    std::iota(test.begin(), test.end(), 2000u);
    TrainConfig cfg;
    cfg.jobs = 4;
    RandomForest rf;
    rf.fit(x.subset(train), std::vector<double>(y.begin(), y.begin() + 2000), cfg);
    const auto p = rf.predict(x, test, 4);
    const double r2 = r_squared(p, std::vector<double>(y.begin() + 2000, y.end()));
    EXPECT_GT(r2, 0.5);
    for (const auto& q : p) EXPECT_GE(q.variance, 0.0);
}

TEST(RandomForest, JobsDoNotChangeResult) {
    const auto x = random_bits(200, 64, 12);
    std::vector<double> y(200);
    Rng rng(13);
    for (auto& v : y) v = rng.normal();
    auto cfg = small_config();
    RandomForest a, b;
    a.fit(x, y, cfg);
    cfg.jobs = 4;
    b.fit(x, y, cfg);
    const auto pa = a.predict(x), pb = b.predict(x, 3);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].mean, pb[i].mean);
        EXPECT_EQ(pa[i].variance, pb[i].variance);
    }
}

TEST(GradientBoosting, FitsAndStagesVariance) {
    const auto x = random_bits(600, 32, 14, 0.3);
    std::vector<double> y(600);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2.0 * x.value(i, 0) - 1.5 * x.value(i, 5) + x.value(i, 9);
    TrainConfig cfg;
    GradientBoostedTrees gbt;
    gbt.fit(x, y, cfg);
    EXPECT_EQ(gbt.trees().size(), 100u);
    for (const auto& t : gbt.trees()) EXPECT_LE(t.leaf_count(), 31u);
    const auto p = gbt.predict(x);
    EXPECT_GT(r_squared(p, y), 0.95);
    // staged-prediction variance, recomputed by hand for one row
    std::vector<double> staged;
    double f = gbt.base_score();
    for (const auto& t : gbt.trees()) {
        f += t.predict(x, 7);
        staged.push_back(f);
    }
    EXPECT_DOUBLE_EQ(p[7].mean, f);
    EXPECT_NEAR(p[7].variance, ensemble_variance(staged), 1e-12);
}

TEST(Mlp, ArchitectureByMode) {
    const auto x = random_bits(60, 32, 15);
    std::vector<double> y(60);
    Rng rng(16);
    for (auto& v : y) v = rng.normal();
    auto cfg = small_config();
    Mlp mse, nll;
    mse.fit(x, y, cfg);
    cfg.mode = LossMode::Nll;
    nll.fit(x, y, cfg);
    EXPECT_EQ(mse.layer_sizes(), (std::vector<std::size_t>{32, 16, 8, 1}));
    EXPECT_EQ(nll.layer_sizes(), (std::vector<std::size_t>{32, 16, 8, 2}));
    for (const auto& p : nll.predict(x)) EXPECT_GE(p.variance, kVarianceFloor);
    for (const auto& p : mse.predict(x)) EXPECT_EQ(p.variance, 0.0);
    EXPECT_GE(nll.best_epoch(), 1);
    EXPECT_LE(nll.best_epoch(), nll.epochs_run());
}

TEST(Mlp, NllLearnsNoiseVariance) {
    const std::size_t n = 1000;
    std::vector<std::vector<std::uint32_t>> rows(n, std::vector<std::uint32_t>{0, 3});
    const auto x = FeatureMatrix::from_bits(rows, 8, FeatureSource::AtomPairBits);
    std::vector<double> y(n);
    Rng rng(17);
    for (auto& v : y) v = 2.0 * rng.normal() + 1.0;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sample_var = ss / static_cast<double>(n - 1);
    TrainConfig cfg;
    cfg.mode = LossMode::Nll;
    cfg.mlp.hidden = {16, 8};
    Mlp mlp;
    mlp.fit(x, y, cfg);
    const auto p = mlp.predict(x)[0];
    EXPECT_GE(p.variance, 0.5 * sample_var);
    EXPECT_LE(p.variance, 2.0 * sample_var);
}

TEST(Mlp, EmbeddingHeadNeedsDenseInput) {
    const auto bits = random_bits(20, 8, 18);
    const auto dense = random_dense(20, 8, 18);
    std::vector<double> y(20, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
    Mlp embed(SurrogateKind::EmbeddingMlp), fp;
    EXPECT_THROW(embed.fit(bits, y, small_config()), Error);
    EXPECT_THROW(fp.fit(dense, y, small_config()), Error);
    EXPECT_NO_THROW(embed.fit(dense, y, small_config()));
}

TEST(Surrogate, SeededDeterminism) {
    const auto x = random_bits(150, 64, 19);
    std::vector<double> y(150);
    Rng rng(20);
    for (auto& v : y) v = rng.normal();
    auto cfg = small_config();
    cfg.seed = 77;
    cfg.mode = LossMode::Nll;
    for (auto kind : {SurrogateKind::RandomForest, SurrogateKind::GradientBoosting, SurrogateKind::FingerprintMlp}) {
        auto a = make_surrogate(kind), b = make_surrogate(kind);
        a->fit(x, y, cfg);
        b->fit(x, y, cfg);
        const auto pa = a->predict(x), pb = b->predict(x);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            ASSERT_EQ(pa[i].mean, pb[i].mean);
            ASSERT_EQ(pa[i].variance, pb[i].variance);
        }
    }
}

TEST(Surrogate, CheckpointRoundTrip) {
    const auto x = random_bits(80, 32, 21);
    std::vector<double> y(80);
    Rng rng(22);
    for (auto& v : y) v = rng.normal();
    auto cfg = small_config();
    cfg.mode = LossMode::Nll;
    for (auto kind : {SurrogateKind::RandomForest, SurrogateKind::GradientBoosting, SurrogateKind::FingerprintMlp}) {
        auto model = make_surrogate(kind);
        std::stringstream empty;
        EXPECT_THROW(save_surrogate(empty, *model), Error);
        model->fit(x, y, cfg);
        std::stringstream buf;
        save_surrogate(buf, *model);
        const auto loaded = load_surrogate(buf);
        EXPECT_EQ(loaded->kind(), kind);
        const auto pa = model->predict(x), pb = loaded->predict(x);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            ASSERT_EQ(pa[i].mean, pb[i].mean);
            ASSERT_EQ(pa[i].variance, pb[i].variance);
        }
    }
    std::stringstream junk("{\"format\":\"other\"}");
    EXPECT_THROW(load_surrogate(junk), Error);
}

TEST(Surrogate, OracleReadsColumn) {
    const auto x = FeatureMatrix::from_dense(5, 1, {3, 1, 4, 1, 5}, FeatureSource::OracleUtility);
    OracleSurrogate oracle;
    oracle.fit(x, std::vector<double>{3, 1, 4, 1, 5}, {});
    EXPECT_DOUBLE_EQ(oracle.predict(x)[4].mean, 5.0);
    OracleSurrogate other;
    EXPECT_THROW(other.fit(random_bits(5, 8, 1), std::vector<double>{1, 2, 3, 4, 5}, {}), Error);
}
