// molbo: retrospective active-learning screening over scored libraries.
//
//   molbo run --config run.yaml [--seed 0,1,2] [--out DIR] ...
//   molbo fingerprint --input smiles.txt --kind morgan --radius 3
//   molbo topk --library lib.csv --k 500 --direction min

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "molbo/molbo.hpp"

namespace fs = std::filesystem;
using namespace molbo;

namespace {

int exit_code_for(const Error& e) {
    switch (e.category()) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Runtime: return 4;
    }
    return 4;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunFlags {
    std::string config;
    RunOverrides o;
    std::string direction, features, surrogate, acquisition, seeds, diversity;
    bool strict = false;
    bool resume = false;
};

std::string seed_stem(std::uint64_t seed) { return "seed" + std::to_string(seed); }

nlohmann::json input_checksums(const RunConfig& cfg) {
    nlohmann::json j;
    j["library"] = {{"path", cfg.library_path}, {"fnv1a64", hex64(file_checksum(cfg.library_path))}};
    if (!cfg.embeddings_path.empty()) {
        j["embeddings"] = {{"path", cfg.embeddings_path}, {"fnv1a64", hex64(file_checksum(cfg.embeddings_path))}};
    }
    return j;
}

int cmd_run(RunFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    auto& o = f.o;
    if (!f.direction.empty()) o.direction = parse_direction(f.direction);
    if (!f.features.empty()) o.features = parse_feature_source(f.features);
    if (!f.surrogate.empty()) o.surrogate = parse_surrogate_kind(f.surrogate);
    if (!f.acquisition.empty()) o.acquisition = parse_strategy(f.acquisition);
    if (!f.seeds.empty()) o.seeds = parse_seed_list(f.seeds);
    if (!f.diversity.empty()) o.diversity = parse_diversity_mode(f.diversity);
    if (f.strict) o.strict = true;
    apply_overrides(cfg, o);
    validate_run_config(cfg);

    const std::string started = utc_now();
    Library lib = load_library(cfg.library_path, cfg.ingest);
    if (!cfg.embeddings_path.empty()) lib = load_embeddings(lib, cfg.embeddings_path, cfg.ingest.strict);

    const fs::path out_dir = cfg.out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create output directory " + out_dir.string() + ": " + ec.message());

    nlohmann::json manifest;
    manifest["tool"] = "molbo";
    manifest["version"] = kVersion;
    manifest["config"] = run_config_json(cfg);
    manifest["config"]["campaign"]["top_k"] = resolved_top_k(cfg.campaign, lib.size());
    manifest["inputs"] = input_checksums(cfg);
    const auto& rep = lib.report();
    manifest["ingest"] = {{"rows_read", rep.rows_read},
                          {"compounds", lib.size()},
                          {"invalid_smiles", rep.invalid_smiles},
                          {"invalid_score", rep.invalid_score},
                          {"malformed", rep.malformed},
                          {"duplicates", rep.duplicates},
                          {"library_checksum", hex64(lib.checksum())},
                          {"embeddings_zero_filled", lib.embeddings_zero_filled()}};
    manifest["started"] = started;
    manifest["status"] = "running";
    manifest["runs"] = nlohmann::json::array();
    auto flush_manifest = [&] {
        write_file_atomic(out_dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    };
    flush_manifest();

    std::vector<CampaignTrace> traces;
    try {
        for (auto seed : cfg.seeds) {
            CampaignConfig cc = cfg.campaign;
            cc.seed = seed;
            const auto stem = seed_stem(seed);
            const auto trace_path = out_dir / ("trace_" + stem + ".json");

            std::optional<CampaignTrace> previous;
            if (f.resume && fs::exists(trace_path)) {
                std::ifstream in(trace_path);
                nlohmann::json prev_cfg;
                previous = read_trace(in, &prev_cfg);
                auto expect = campaign_config_json(cc);
                expect["top_k"] = resolved_top_k(cc, lib.size());
                if (prev_cfg != expect) {
                    throw Error(Errc::ConfigInvalid, "cannot resume " + trace_path.string() + ": config differs");
                }
            }

            auto flush = [&](const CampaignTrace& t) {
                write_file_atomic(trace_path, [&](std::ostream& os) { write_trace(os, t); });
            };
            auto trace = run_campaign(lib, cc, flush, previous ? &*previous : nullptr);
            flush(trace);
            write_file_atomic(out_dir / ("iterations_" + stem + ".csv"),
                              [&](std::ostream& os) { write_iteration_table(os, trace); });
            write_file_atomic(out_dir / ("acquired_" + stem + ".csv"),
                              [&](std::ostream& os) { write_acquired(os, trace, lib); });
            write_file_atomic(out_dir / ("timings_" + stem + ".csv"),
                              [&](std::ostream& os) { write_timings_csv(os, trace); });

            const auto& last = trace.iterations.back();
            std::cerr << "seed " << seed << ": top-" << trace.config.top_k << " retrieval " << last.topk_retrieval
                      << " at " << last.explored_fraction << " explored (EF " << last.enrichment_factor << ")\n";
            manifest["runs"].push_back({{"seed", seed}, {"trace", trace_path.filename().string()}, {"complete", true}});
            flush_manifest();
            traces.push_back(std::move(trace));
        }
        write_file_atomic(out_dir / "aggregate.csv",
                          [&](std::ostream& os) { write_aggregate(os, aggregate_traces(traces)); });
    } catch (const std::exception& e) {
        manifest["status"] = "incomplete";
        manifest["error"] = e.what();
        manifest["finished"] = utc_now();
        flush_manifest();
        throw;
    }
    manifest["status"] = "complete";
    manifest["finished"] = utc_now();
    flush_manifest();
    return 0;
}

struct FingerprintFlags {
    std::string input = "-";
    std::string output = "-";
    std::string rejects;
    std::string kind = "morgan";
    int radius = 3;
    int min_distance = 1;
    int max_distance = 3;
    std::uint32_t width = 2048;
};

int cmd_fingerprint(const FingerprintFlags& f) {
    FingerprintSpec spec;
    if (f.kind == "morgan") spec = FingerprintSpec::morgan(f.radius, f.width);
    else spec = FingerprintSpec::atom_pair(f.min_distance, f.max_distance, f.width);

    std::ifstream in_file;
    std::istream* in = &std::cin;
    if (f.input != "-") {
        in_file.open(f.input);
        if (!in_file) throw Error(Errc::Io, "cannot open input file '" + f.input + "'");
        in = &in_file;
    }
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (f.output != "-") {
        out_file.open(f.output, std::ios::trunc);
        if (!out_file) throw Error(Errc::Io, "cannot write '" + f.output + "'");
        out = &out_file;
    }
    std::ofstream rej_file;
    std::ostream* rej = &std::cerr;
    if (!f.rejects.empty()) {
        rej_file.open(f.rejects, std::ios::trunc);
        if (!rej_file) throw Error(Errc::Io, "cannot write '" + f.rejects + "'");
        rej = &rej_file;
    }

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(*in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto end = text.find_first_of(" \t,");
        const auto smiles = std::string(text.substr(0, end));
        try {
            const auto fp = compute_fingerprint(parse_smiles(smiles), spec);
            *out << smiles << ',' << fp.popcount() << ',' << fp.to_hex() << '\n';
        } catch (const Error& e) {
            *rej << line_no << ',' << smiles << ',' << e.name() << '\n';
        }
    }
    return 0;
}

struct TopkFlags {
    std::string library;
    std::size_t k = 0;
    std::string direction = "min";
    std::string smiles_col = "smiles";
    std::string score_col = "score";
    std::string output = "-";
    bool strict = false;
};

int cmd_topk(const TopkFlags& f) {
    IngestOptions opts;
    opts.smiles_column = f.smiles_col;
    opts.score_column = f.score_col;
    opts.direction = parse_direction(f.direction);
    opts.strict = f.strict;
    const auto lib = load_library(f.library, opts);
    const auto ranked = lib.topk_ranked(f.k);
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (f.output != "-") {
        out_file.open(f.output, std::ios::trunc);
        if (!out_file) throw Error(Errc::Io, "cannot write '" + f.output + "'");
        out = &out_file;
    }
    *out << "rank,index,smiles,score\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        *out << r + 1 << ',' << ranked[r] << ',' << lib.smiles(ranked[r]) << ',' << detail::fmt_real(lib.score(ranked[r]))
             << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-learning virtual screening over scored compound libraries"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Run one or more seeded screening campaigns");
    run->add_option("--config", rf.config, "YAML run configuration")->check(CLI::ExistingFile);
    run->add_option("--library", rf.o.library, "Scored library file");
    run->add_option("--score-col", rf.o.score_col, "Score column name");
    run->add_option("--smiles-col", rf.o.smiles_col, "SMILES column name");
    run->add_option("--direction", rf.direction, "Which scores are better")->check(CLI::IsMember({"min", "max"}));
    run->add_option("--features", rf.features, "Feature source")->check(CLI::IsMember({"atom-pair", "morgan", "embedding"}));
    run->add_option("--embeddings", rf.o.embeddings, "Per-compound embedding file");
    run->add_option("--surrogate", rf.surrogate, "Surrogate model")->check(CLI::IsMember({"rf", "gbt", "mlp", "embed-mlp"}));
    run->add_option("--acquisition", rf.acquisition, "Acquisition strategy")
        ->check(CLI::IsMember({"greedy", "ucb", "random"}));
    run->add_option("--beta", rf.o.beta, "UCB uncertainty weight");
    run->add_option("--init-frac", rf.o.init_frac, "Initial random fraction");
    run->add_option("--batch-frac", rf.o.batch_frac, "Fraction acquired per iteration");
    run->add_option("--iterations", rf.o.iterations, "Acquisition iterations");
    run->add_option("--top-k", rf.o.top_k, "k for top-k retrieval");
    run->add_option("--seed", rf.seeds, "Seed or comma-separated seed list");
    run->add_option("--diversity", rf.diversity, "Diversity metric mode")
        ->check(CLI::IsMember({"off", "exact", "subsample"}));
    run->add_option("--out", rf.o.out, "Output directory");
    run->add_option("--jobs", rf.o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--strict", rf.strict, "Fail on malformed library rows");
    run->add_flag("--resume", rf.resume, "Continue from traces already in the output directory");

    FingerprintFlags ff;
    auto* fp = app.add_subcommand("fingerprint", "Fingerprint one SMILES per line");
    fp->add_option("--input", ff.input, "Input file ('-' for stdin)");
    fp->add_option("--output", ff.output, "Output file ('-' for stdout)");
    fp->add_option("--rejects", ff.rejects, "Reject list (default stderr)");
    fp->add_option("--kind", ff.kind, "Fingerprint kind")->check(CLI::IsMember({"morgan", "atom-pair"}));
    fp->add_option("--radius", ff.radius, "Morgan radius");
    fp->add_option("--min-distance", ff.min_distance, "Atom-pair minimum distance");
    fp->add_option("--max-distance", ff.max_distance, "Atom-pair maximum distance");
    fp->add_option("--width", ff.width, "Bit width");

    TopkFlags tf;
    auto* tk = app.add_subcommand("topk", "List the true top-k of a library, best first");
    tk->add_option("--library", tf.library, "Scored library file")->required();
    tk->add_option("--k", tf.k, "How many")->required();
    tk->add_option("--direction", tf.direction, "Which scores are better")->check(CLI::IsMember({"min", "max"}));
    tk->add_option("--smiles-col", tf.smiles_col, "SMILES column name");
    tk->add_option("--score-col", tf.score_col, "Score column name");
    tk->add_option("--out", tf.output, "Output file ('-' for stdout)");
    tk->add_flag("--strict", tf.strict, "Fail on malformed library rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) return cmd_run(rf);
        if (*fp) return cmd_fingerprint(ff);
        if (*tk) return cmd_topk(tf);
    } catch (const Error& e) {
        std::cerr << "molbo: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "molbo: internal error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
