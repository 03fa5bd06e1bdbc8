#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("molbo_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Result run(const std::string& args, const std::string& stdin_text = "") const {
        const auto in = dir_ / "stdin.txt", out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        spit(in, stdin_text);
        const std::string cmd = std::string("\"") + MOLBO_CLI_PATH + "\" " + args + " < \"" + in.string() + "\" > \"" +
                                out.string() + "\" 2> \"" + err.string() + "\"";
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    fs::path write_library(std::size_t n) const {
        const auto lib = molbo::fixtures::learnable_library(n, 3);
        std::ostringstream csv;
        csv << "smiles,score\n";
        for (std::size_t i = 0; i < lib.size(); ++i) csv << lib.smiles(i) << ',' << lib.score(i) << '\n';
        const auto p = dir_ / "library.csv";
        spit(p, csv.str());
        return p;
    }

    std::string path(const std::string& name) const { return "\"" + (dir_ / name).string() + "\""; }

    fs::path dir_;
};

const char* kFast = " --iterations 2 --init-frac 0.05 --batch-frac 0.05 --top-k 20 --diversity off";

} // namespace

TEST_F(Cli, RunThreeSeeds) {
    const auto lib = write_library(400);
    const auto r = run("run --library \"" + lib.string() + "\" --surrogate rf --seed 0,1,2 --jobs 2 --out " +
                       path("out") + kFast);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto out = dir_ / "out";
    for (int s = 0; s < 3; ++s) {
        const auto stem = "seed" + std::to_string(s);
        ASSERT_TRUE(fs::exists(out / ("trace_" + stem + ".json")));
        EXPECT_TRUE(fs::exists(out / ("iterations_" + stem + ".csv")));
        EXPECT_TRUE(fs::exists(out / ("acquired_" + stem + ".csv")));
        EXPECT_TRUE(fs::exists(out / ("timings_" + stem + ".csv")));
        const auto trace = nlohmann::json::parse(slurp(out / ("trace_" + stem + ".json")));
        EXPECT_EQ(trace["config"]["seed"], s);
        EXPECT_EQ(trace["iterations"].size(), 3u);
        EXPECT_TRUE(trace["complete"].get<bool>());
    }
    const auto aggregate = slurp(out / "aggregate.csv");
    EXPECT_EQ(aggregate.rfind("iteration,runs,", 0), 0u);
    EXPECT_NE(aggregate.find("\n2,3,"), std::string::npos) << aggregate;
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["status"], "complete");
    EXPECT_EQ(manifest["runs"].size(), 3u);
    EXPECT_EQ(manifest["config"]["seeds"], nlohmann::json::array({0, 1, 2}));
    EXPECT_EQ(manifest["inputs"]["library"]["fnv1a64"].get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest.contains("started"));
    EXPECT_TRUE(manifest.contains("finished"));
    EXPECT_TRUE(manifest.contains("version"));
}

TEST_F(Cli, MissingLibraryNamesPath) {
    const auto missing = (dir_ / "nowhere.csv").string();
    const auto r = run("run --library \"" + missing + "\" --out " + path("out"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST_F(Cli, FlagsOverrideConfigFile) {
    const auto lib = write_library(400);
    spit(dir_ / "run.yaml", "library:\n  path: " + lib.string() +
                                "\nacquisition:\n  strategy: greedy\n  beta: 1\ncampaign:\n  iterations: 1\n  init_frac: 0.05\n"
                                "  diversity: off\n  top_k: 20\n");
    const auto r = run("run --config " + path("run.yaml") + " --acquisition ucb --beta 5 --surrogate rf --out " +
                       path("out"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = nlohmann::json::parse(slurp(dir_ / "out" / "manifest.json"));
    EXPECT_EQ(manifest["config"]["campaign"]["acquisition"]["strategy"], "ucb");
    EXPECT_EQ(manifest["config"]["campaign"]["acquisition"]["beta"], 5.0);
    EXPECT_EQ(manifest["config"]["campaign"]["iterations"], 1);
}

TEST_F(Cli, EveryRunFlagRecordedInManifest) {
    const auto lib = write_library(400);
    std::ostringstream tsv;
    tsv << "name\tsmi\tenergy\n";
    {
        std::ifstream in(lib);
        std::string line;
        std::getline(in, line);
        int i = 0;
        while (std::getline(in, line)) {
            const auto comma = line.find(',');
            tsv << "m" << i++ << '\t' << line.substr(0, comma) << '\t' << line.substr(comma + 1) << '\n';
        }
    }
    // the tab-separated file only loads with the right columns and delimiter
    spit(dir_ / "lib.tsv", tsv.str());
    spit(dir_ / "run.yaml", "library:\n  path: wrong.csv\n  delimiter: tab\n  smiles_column: x\n  score_column: y\n"
                            "  direction: max\nfeatures:\n  source: morgan\nsurrogate:\n  model: gbt\n"
                            "  boosting: {n_trees: 10}\n  forest: {n_trees: 10}\n"
                            "acquisition:\n  strategy: greedy\n  beta: 1\n"
                            "campaign:\n  init_frac: 0.1\n  batch_frac: 0.1\n  iterations: 4\n  top_k: 50\n"
                            "  seeds: [9]\n  diversity: exact\n  jobs: 1\noutput:\n  dir: " +
                                (dir_ / "wrong").string() + "\n");
    const auto r = run("run --config " + path("run.yaml") + " --library " + path("lib.tsv") +
                       " --smiles-col smi --score-col energy --direction min --features atom-pair --surrogate rf"
                       " --acquisition ucb --beta 0.5 --init-frac 0.05 --batch-frac 0.04 --iterations 2 --top-k 12"
                       " --seed 4 --diversity subsample --out " + path("out") + " --jobs 2 --strict");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(fs::exists(dir_ / "wrong"));
    const auto m = nlohmann::json::parse(slurp(dir_ / "out" / "manifest.json"));
    const auto& lib_cfg = m["config"]["library"];
    const auto& c = m["config"]["campaign"];
    EXPECT_EQ(lib_cfg["path"], (dir_ / "lib.tsv").string());
    EXPECT_EQ(lib_cfg["smiles_column"], "smi");
    EXPECT_EQ(lib_cfg["score_column"], "energy");
    EXPECT_EQ(lib_cfg["direction"], "min");
    EXPECT_EQ(lib_cfg["strict"], true);
    EXPECT_EQ(c["features"], "atom-pair");
    EXPECT_EQ(c["surrogate"], "rf");
    EXPECT_EQ(c["acquisition"]["strategy"], "ucb");
    EXPECT_EQ(c["acquisition"]["beta"], 0.5);
    EXPECT_EQ(c["init_frac"], 0.05);
    EXPECT_EQ(c["batch_frac"], 0.04);
    EXPECT_EQ(c["iterations"], 2);
    EXPECT_EQ(c["top_k"], 12);
    EXPECT_EQ(c["diversity"]["mode"], "subsample");
    EXPECT_EQ(c["jobs"], 2);
    EXPECT_EQ(m["config"]["seeds"], nlohmann::json::array({4}));
    EXPECT_EQ(m["config"]["output"]["dir"], (dir_ / "out").string());
    EXPECT_TRUE(fs::exists(dir_ / "out" / "trace_seed4.json"));

    // embeddings flag: a 400-row binary file, used by the embedding MLP
    {
        std::ofstream emb(dir_ / "emb.bin", std::ios::binary);
        std::vector<float> values(400 * 3);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(i % 7);
        molbo::write_embeddings_binary(emb, 3, values);
    }
    const auto e = run("run --library \"" + lib.string() + "\" --features embedding --embeddings " + path("emb.bin") +
                       " --surrogate embed-mlp --out " + path("emb_out") + kFast);
    ASSERT_EQ(e.code, 0) << e.err;
    const auto em = nlohmann::json::parse(slurp(dir_ / "emb_out" / "manifest.json"));
    EXPECT_EQ(em["config"]["library"]["embeddings"], (dir_ / "emb.bin").string());
    EXPECT_EQ(em["config"]["campaign"]["features"], "embedding");
    EXPECT_TRUE(em["inputs"].contains("embeddings"));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
    spit(dir_ / "bad.yaml", "campaign:\n  iterations: 5\n  bogus: 1\n");
    const auto r = run("run --config " + path("bad.yaml") + " --library x.csv");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bad.yaml:3"), std::string::npos) << r.err;
    EXPECT_EQ(run("run --library x.csv --acquisition bogus").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, ResumeContinuesPartialTrace) {
    const auto lib = write_library(400);
    const std::string base = "run --library \"" + lib.string() + "\" --surrogate rf --seed 5" + kFast;
    ASSERT_EQ(run(base + " --out " + path("full")).code, 0);
    const auto full = slurp(dir_ / "full" / "trace_seed5.json");

    // cut the trace back to iteration 0 and resume
    auto j = nlohmann::json::parse(full);
    while (j["iterations"].size() > 1) j["iterations"].erase(1);
    j["complete"] = false;
    fs::create_directories(dir_ / "part");
    spit(dir_ / "part" / "trace_seed5.json", j.dump(2) + "\n");
    const auto r = run(base + " --out " + path("part") + " --resume");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir_ / "part" / "trace_seed5.json"), full);

    const auto mismatch = run(base + " --out " + path("part") + " --resume --beta 9");
    EXPECT_EQ(mismatch.code, 2);
}

TEST_F(Cli, FingerprintPermutationInvariant) {
    spit(dir_ / "in.smi", "CCO\nOCC\n");
    const auto r = run("fingerprint --input " + path("in.smi") + " --kind morgan --radius 3");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string a, b;
    std::getline(lines, a);
    std::getline(lines, b);
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a.substr(a.find(',')), b.substr(b.find(',')));
    EXPECT_EQ(a.rfind("CCO,", 0), 0u);
    EXPECT_EQ(a.size() - a.rfind(',') - 1, 512u);
}

TEST_F(Cli, FingerprintRejects) {
    spit(dir_ / "in.smi", "CCO\nC1CC\nc1ccccc1 benzene\n");
    const auto r = run("fingerprint --input " + path("in.smi") + " --kind atom-pair --rejects " + path("rej.txt") +
                       " --output " + path("fp.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir_ / "rej.txt"), "2,C1CC,UnmatchedRingClosure\n");
    const auto out = slurp(dir_ / "fp.csv");
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 2);
    EXPECT_NE(out.find("c1ccccc1,"), std::string::npos);
}

TEST_F(Cli, FingerprintEmptyInput) {
    spit(dir_ / "empty.smi", "");
    const auto r = run("fingerprint --input " + path("empty.smi"));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "");
    const auto piped = run("fingerprint", "");
    EXPECT_EQ(piped.code, 0);
    EXPECT_EQ(piped.out, "");
}

TEST_F(Cli, TopK) {
    spit(dir_ / "lib.csv", "smiles,score\nCCO,-9.1\nc1ccccc1,-7.0\nCC(=O)O,-8.2\n");
    const auto one = run("topk --library " + path("lib.csv") + " --k 1 --direction min");
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(one.out, "rank,index,smiles,score\n1,0,CCO,-9.1\n");
    const auto all = run("topk --library " + path("lib.csv") + " --k 3");
    EXPECT_EQ(all.out, "rank,index,smiles,score\n1,0,CCO,-9.1\n2,2,CC(=O)O,-8.2\n3,1,c1ccccc1,-7\n");
    const auto max = run("topk --library " + path("lib.csv") + " --k 1 --direction max");
    EXPECT_EQ(max.out, "rank,index,smiles,score\n1,1,c1ccccc1,-7\n");
    const auto big = run("topk --library " + path("lib.csv") + " --k 4");
    EXPECT_EQ(big.code, 2);
    EXPECT_NE(big.err.find("KTooLarge"), std::string::npos) << big.err;
}
