#pragma once

// Operator surface: subcommands tying the pipeline together (data synth
// and ingestion, embedding precompute, LM pretraining, training,
// generation, evaluation, ablations, the K sweep, the uniqueness study,
// and report rendering). Everything is deterministic given (config, seed),
// and every report embeds the config/corpus/checkpoint hashes it was
// produced under.

#include <string>
#include <vector>

#include <json.hpp>

#include "dep/corpus.hpp"
#include "dep/embedder.hpp"
#include "dep/toylm.hpp"
#include "dep/trainer.hpp"

namespace dep {

// Exit codes: 0 success, 2 bad config, 3 data error, 4 numerical failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct PretrainConfig {
    int steps = 4000;
    int k = 3;
    double lr = 1e-3;
    int warmup_steps = 50;
    std::uint64_t seed = 11;
};

struct GenConfig {
    int max_new = 96;
    double temperature = 0.8;
    double top_p = 0.95;
    bool greedy = true;
    std::uint64_t seed = 0;
    int limit = 0;
    int threads = 1;
};

struct Paths {
    std::string main;
    std::string meta;
    std::string template_path;  // empty: builtin default template
    std::string lm;
    std::string checkpoint;
    std::string out;
    std::string log;
};

struct RunConfig {
    Paths paths;
    EmbedderSpec embedder;
    LmConfig lm;
    PretrainConfig pretrain;
    TrainConfig train;
    SplitPolicy split_policy;
    SynthConfig synth;
    GenConfig gen;

    // Hash of the materialized configuration, echoed into every report.
    std::uint64_t content_hash() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
// Strict: unknown keys anywhere reject the whole config.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

void apply_preset(RunConfig& config, const std::string& preset);  // "desk" | "paper"

// args exclude the program name. Errors print one machine-parsable line
// to stderr: {"error":{"code":N,"message":"..."}}.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace dep
