#include "dep/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dep/diffrep.hpp"
#include "dep/hash.hpp"
#include "dep/metrics.hpp"
#include "dep/serialize.hpp"
#include "dep/trainer_json.hpp"

namespace dep {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
    throw std::invalid_argument(message);
}

void reject_unknown(const json& j, const std::string& section,
                    const std::vector<std::string>& known) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            config_error("config: unknown key '" + key + "' in " + section);
        }
    }
}

json paths_to_json(const Paths& p) {
    return json{{"main", p.main},       {"meta", p.meta}, {"template", p.template_path},
                {"lm", p.lm},           {"checkpoint", p.checkpoint},
                {"out", p.out},         {"log", p.log}};
}

Paths paths_from_json(const json& j, Paths p) {
    reject_unknown(j, "paths", {"main", "meta", "template", "lm", "checkpoint", "out", "log"});
    p.main = j.value("main", p.main);
    p.meta = j.value("meta", p.meta);
    p.template_path = j.value("template", p.template_path);
    p.lm = j.value("lm", p.lm);
    p.checkpoint = j.value("checkpoint", p.checkpoint);
    p.out = j.value("out", p.out);
    p.log = j.value("log", p.log);
    return p;
}

json embedder_to_json(const EmbedderSpec& e) {
    return json{{"dim", e.dim},
                {"ngram_min", e.ngram_min},
                {"ngram_max", e.ngram_max},
                {"num_buckets", e.num_buckets},
                {"seed", e.seed}};
}

EmbedderSpec embedder_from_json(const json& j, EmbedderSpec e) {
    reject_unknown(j, "embedder", {"dim", "ngram_min", "ngram_max", "num_buckets", "seed"});
    e.dim = j.value("dim", e.dim);
    e.ngram_min = j.value("ngram_min", e.ngram_min);
    e.ngram_max = j.value("ngram_max", e.ngram_max);
    e.num_buckets = j.value("num_buckets", e.num_buckets);
    e.seed = j.value("seed", e.seed);
    return e;
}

json lm_to_json(const LmConfig& c) {
    return json{{"d_lm", c.d_lm},
                {"layers", c.layers},
                {"heads", c.heads},
                {"context", c.context},
                {"seed", c.seed}};
}

LmConfig lm_from_json(const json& j, LmConfig c) {
    reject_unknown(j, "lm", {"d_lm", "layers", "heads", "context", "seed"});
    c.d_lm = j.value("d_lm", c.d_lm);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.context = j.value("context", c.context);
    c.seed = j.value("seed", c.seed);
    return c;
}

json pretrain_to_json(const PretrainConfig& c) {
    return json{{"steps", c.steps},
                {"k", c.k},
                {"lr", c.lr},
                {"warmup_steps", c.warmup_steps},
                {"seed", c.seed}};
}

PretrainConfig pretrain_from_json(const json& j, PretrainConfig c) {
    reject_unknown(j, "pretrain", {"steps", "k", "lr", "warmup_steps", "seed"});
    c.steps = j.value("steps", c.steps);
    c.k = j.value("k", c.k);
    c.lr = j.value("lr", c.lr);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
    return c;
}

json split_to_json(const SplitPolicy& s) {
    return json{{"validation_size", s.validation_size}, {"seed", s.seed}};
}

SplitPolicy split_from_json(const json& j, SplitPolicy s) {
    reject_unknown(j, "split", {"validation_size", "seed"});
    s.validation_size = j.value("validation_size", s.validation_size);
    s.seed = j.value("seed", s.seed);
    return s;
}

json synth_to_json(const SynthConfig& s) {
    return json{{"users", s.users},
                {"items", s.items},
                {"reviews_per_user", s.reviews_per_user},
                {"seed", s.seed}};
}

SynthConfig synth_from_json(const json& j, SynthConfig s) {
    reject_unknown(j, "synth", {"users", "items", "reviews_per_user", "seed"});
    s.users = j.value("users", s.users);
    s.items = j.value("items", s.items);
    s.reviews_per_user = j.value("reviews_per_user", s.reviews_per_user);
    s.seed = j.value("seed", s.seed);
    return s;
}

json gen_to_json(const GenConfig& g) {
    return json{{"max_new", g.max_new}, {"temperature", g.temperature}, {"top_p", g.top_p},
                {"greedy", g.greedy},   {"seed", g.seed},               {"limit", g.limit},
                {"threads", g.threads}};
}

GenConfig gen_from_json(const json& j, GenConfig g) {
    reject_unknown(j, "gen",
                   {"max_new", "temperature", "top_p", "greedy", "seed", "limit", "threads"});
    g.max_new = j.value("max_new", g.max_new);
    g.temperature = j.value("temperature", g.temperature);
    g.top_p = j.value("top_p", g.top_p);
    g.greedy = j.value("greedy", g.greedy);
    g.seed = j.value("seed", g.seed);
    g.limit = j.value("limit", g.limit);
    g.threads = j.value("threads", g.threads);
    return g;
}

}  // namespace

std::uint64_t RunConfig::content_hash() const {
    HashAccumulator h;
    h.update("run-config-v1");
    h.update(run_config_to_json(*this).dump());
    return h.digest();
}

json run_config_to_json(const RunConfig& c) {
    return json{{"paths", paths_to_json(c.paths)},
                {"embedder", embedder_to_json(c.embedder)},
                {"lm", lm_to_json(c.lm)},
                {"pretrain", pretrain_to_json(c.pretrain)},
                {"train", train_config_to_json(c.train)},
                {"split", split_to_json(c.split_policy)},
                {"synth", synth_to_json(c.synth)},
                {"gen", gen_to_json(c.gen)}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) config_error("config: expected a JSON object");
    reject_unknown(j, "config",
                   {"paths", "embedder", "lm", "pretrain", "train", "split", "synth", "gen"});
    if (j.contains("paths")) c.paths = paths_from_json(j["paths"], c.paths);
    if (j.contains("embedder")) c.embedder = embedder_from_json(j["embedder"], c.embedder);
    if (j.contains("lm")) c.lm = lm_from_json(j["lm"], c.lm);
    if (j.contains("pretrain")) c.pretrain = pretrain_from_json(j["pretrain"], c.pretrain);
    if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    if (j.contains("split")) c.split_policy = split_from_json(j["split"], c.split_policy);
    if (j.contains("synth")) c.synth = synth_from_json(j["synth"], c.synth);
    if (j.contains("gen")) c.gen = gen_from_json(j["gen"], c.gen);
    return c;
}

void apply_preset(RunConfig& config, const std::string& preset) {
    if (preset == "desk" || preset.empty()) return;  // defaults are the desk preset
    if (preset == "paper") {
        config.train.lr = 1e-5;
        config.train.projector_hidden = 512;
        config.gen.greedy = false;
        config.gen.max_new = 256;
        return;
    }
    config_error("unknown preset '" + preset + "' (expected desk or paper)");
}

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Corpus load_corpus(const RunConfig& cfg, IngestReport* report = nullptr) {
    if (cfg.paths.main.empty() || cfg.paths.meta.empty()) {
        config_error("missing --main/--meta corpus paths");
    }
    try {
        return ingest(cfg.paths.main, cfg.paths.meta, report);
    } catch (const std::runtime_error& e) {
        throw DataError(e.what());
    }
}

PromptTemplate template_for(const RunConfig& cfg) {
    if (cfg.paths.template_path.empty()) {
        return parse_prompt_template(default_prompt_template_text());
    }
    return load_prompt_template(cfg.paths.template_path);
}

LmState load_lm_checked(const RunConfig& cfg) {
    if (cfg.paths.lm.empty()) config_error("missing --lm frozen model path");
    try {
        return load_lm(cfg.paths.lm);
    } catch (const std::runtime_error& e) {
        throw DataError(e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f << text;
}

json hashes_json(const RunConfig& cfg, const Corpus* corpus, const Checkpoint* ckpt) {
    return json{{"config_hash", to_hex(cfg.content_hash())},
                {"corpus_hash", corpus ? to_hex(corpus->content_hash()) : ""},
                {"checkpoint_hash", ckpt ? to_hex(ckpt->content_hash) : ""}};
}

json metrics_to_json(const MetricReport& m) {
    return json{{"rouge1",
                 {{"precision", m.rouge.precision}, {"recall", m.rouge.recall}, {"f1", m.rouge.f1}}},
                {"bleu", m.bleu_score},
                {"meteor", m.meteor},
                {"count", m.count}};
}

EvalOptions eval_options(const RunConfig& cfg, int k_override = -1) {
    EvalOptions o;
    o.k = k_override;
    o.greedy = cfg.gen.greedy;
    o.temperature = cfg.gen.temperature;
    o.top_p = cfg.gen.top_p;
    o.max_new = cfg.gen.max_new;
    o.seed = cfg.gen.seed;
    o.limit = cfg.gen.limit;
    o.threads = cfg.gen.threads;
    return o;
}

const std::vector<TargetInstance>& pick_split(const Splits& splits, const std::string& name) {
    if (name == "train") return splits.train;
    if (name == "validation") return splits.validation;
    if (name == "test") return splits.test;
    config_error("unknown split '" + name + "'");
}

// ---- commands ----

int cmd_ingest(const RunConfig& cfg) {
    IngestReport report;
    Corpus corpus = load_corpus(cfg, &report);
    json out{{"kind", "ingest"},
             {"accepted", report.accepted},
             {"rejected", report.rejected.size()},
             {"users", corpus.user_ids().size()},
             {"items", corpus.items().size()},
             {"corpus_hash", to_hex(corpus.content_hash())},
             {"errors", report.rejected}};
    if (!cfg.paths.out.empty()) write_text(cfg.paths.out, out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
}

int cmd_synth(const RunConfig& cfg) {
    if (cfg.paths.main.empty() || cfg.paths.meta.empty()) {
        config_error("synth needs --main/--meta output paths");
    }
    Corpus corpus = generate_synthetic(cfg.synth);
    write_corpus(corpus, cfg.paths.main, cfg.paths.meta);
    json out{{"kind", "synth"},
             {"users", cfg.synth.users},
             {"items", cfg.synth.items},
             {"reviews", corpus.reviews().size()},
             {"corpus_hash", to_hex(corpus.content_hash())}};
    std::cout << out.dump() << "\n";
    return kExitOk;
}

int cmd_embed(const RunConfig& cfg) {
    if (cfg.paths.out.empty()) config_error("embed needs --out cache path");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    DiffRepFile file;
    file.corpus_hash = corpus.content_hash();
    file.embedder_hash = cfg.embedder.content_hash();
    file.dim = cfg.embedder.dim;
    EmbedCache cache(cfg.embedder);
    DiffRepOptions opts;
    opts.k = cfg.train.k;
    opts.m_max = cfg.train.m_max;
    opts.peers_before_target = cfg.train.peers_before_target;
    auto add_targets = [&](const std::vector<TargetInstance>& targets) {
        for (const TargetInstance& t : targets) {
            const Review& r = corpus.reviews()[static_cast<std::size_t>(t.review_index)];
            file.instances.push_back(
                build_all(corpus, cfg.embedder, r.user_id, r.item_id, opts, &cache));
        }
    };
    add_targets(splits.train);
    add_targets(splits.validation);
    add_targets(splits.test);
    save_diffrep_file(file, cfg.paths.out);
    json out{{"kind", "embed"},
             {"instances", file.instances.size()},
             {"corpus_hash", to_hex(file.corpus_hash)},
             {"embedder_hash", to_hex(file.embedder_hash)}};
    std::cout << out.dump() << "\n";
    return kExitOk;
}

int cmd_pretrain_lm(const RunConfig& cfg) {
    if (cfg.paths.out.empty()) config_error("pretrain-lm needs --out model path");
    Corpus corpus = load_corpus(cfg);
    PretrainOptions opts;
    opts.steps = cfg.pretrain.steps;
    opts.k = cfg.pretrain.k;
    opts.lr = cfg.pretrain.lr;
    opts.warmup_steps = cfg.pretrain.warmup_steps;
    opts.seed = cfg.pretrain.seed;
    LmState lm = pretrain_frozen(corpus, cfg.lm, template_for(cfg), opts);
    save_lm(lm, cfg.paths.out);
    json out{{"kind", "pretrain-lm"},
             {"steps", opts.steps},
             {"param_hash", to_hex(lm_param_hash(lm))},
             {"corpus_hash", to_hex(corpus.content_hash())}};
    std::cout << out.dump() << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.paths.out.empty()) config_error("train needs --out checkpoint path");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    LmState lm = load_lm_checked(cfg);
    PromptTemplate tpl = template_for(cfg);
    TrainResult result = train(corpus, splits, cfg.train, lm, cfg.embedder, tpl,
                               [](const std::string& line) { std::cerr << line << "\n"; });
    save_checkpoint(result.best, cfg.paths.out);
    if (!cfg.paths.log.empty()) {
        std::ostringstream log;
        for (const StepLog& s : result.log) {
            log << json{{"step", s.step},        {"l_gen", s.l_gen},   {"l_recon", s.l_recon},
                        {"l_sparse", s.l_sparse}, {"l_total", s.l_total}, {"lr", s.lr}}
                       .dump()
                << "\n";
        }
        write_text(cfg.paths.log, log.str());
    }
    json out{{"kind", "train"},
             {"epochs", result.epoch_train_loss.size()},
             {"epoch_train_loss", result.epoch_train_loss},
             {"epoch_val_meteor", result.epoch_val_meteor},
             {"best_epoch", result.best.epoch},
             {"best_val_meteor", result.best.val_metric},
             {"checkpoint_hash", to_hex(result.best.content_hash)},
             {"corpus_hash", to_hex(corpus.content_hash())},
             {"config_hash", to_hex(cfg.content_hash())}};
    std::cout << out.dump() << "\n";
    return kExitOk;
}

int cmd_generate(const RunConfig& cfg, const std::string& split_name, int k_override,
                 std::optional<bool> use_text_override) {
    if (cfg.paths.out.empty()) config_error("generate needs --out predictions path");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    LmState lm = load_lm_checked(cfg);
    PromptTemplate tpl = template_for(cfg);

    TrainConfig train_cfg = cfg.train;
    std::optional<Checkpoint> ckpt;
    if (!cfg.paths.checkpoint.empty()) {
        // The checkpoint's own flag set drives the prompts; explicit
        // --text/--no-text still overrides.
        ckpt = load_checkpoint(cfg.paths.checkpoint);
        train_cfg = ckpt->config;
        if (use_text_override) train_cfg.use_text = *use_text_override;
    } else if (cfg.train.has_soft_prompts()) {
        config_error("generate: soft-prompt modes need --checkpoint");
    }

    const std::vector<TargetInstance>& targets = pick_split(splits, split_name);
    if (targets.empty()) {
        throw DataError("generate: split '" + split_name +
                        "' is empty (check corpus size and --val-size)");
    }
    std::vector<PredictionRecord> preds =
        generate_predictions(corpus, targets, lm, ckpt ? &*ckpt : nullptr, train_cfg,
                             cfg.embedder, tpl, eval_options(cfg, k_override));

    std::ostringstream body;
    json header{{"kind", "predictions"},
                {"split", split_name},
                {"count", preds.size()},
                {"k", k_override >= 0 ? k_override : train_cfg.k}};
    header.update(hashes_json(cfg, &corpus, ckpt ? &*ckpt : nullptr));
    body << header.dump() << "\n";
    for (const PredictionRecord& p : preds) {
        body << json{{"user_id", p.user_id},
                     {"item_id", p.item_id},
                     {"prediction", p.prediction},
                     {"reference", p.reference}}
                    .dump()
             << "\n";
    }
    write_text(cfg.paths.out, body.str());
    std::cout << json{{"kind", "generate"}, {"count", preds.size()}, {"out", cfg.paths.out}}.dump()
              << "\n";
    return kExitOk;
}

std::vector<PredictionRecord> read_predictions(const std::string& path, json* header) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read predictions " + path);
    std::vector<PredictionRecord> preds;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("predictions: invalid JSON line in " + path);
        if (j.contains("kind")) {
            if (header) *header = j;
            continue;
        }
        PredictionRecord p;
        p.user_id = j.value("user_id", "");
        p.item_id = j.value("item_id", "");
        p.prediction = j.value("prediction", "");
        p.reference = j.value("reference", "");
        preds.push_back(std::move(p));
    }
    if (preds.empty()) throw DataError("predictions: no records in " + path);
    return preds;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& predictions_path) {
    json header = json::object();  // stays empty when the file has no header line
    std::vector<PredictionRecord> preds = read_predictions(predictions_path, &header);
    MetricReport report = evaluate_predictions(preds);
    json out{{"kind", "evaluate"},
             {"metrics", metrics_to_json(report)},
             {"predictions", predictions_path},
             {"config_hash", to_hex(cfg.content_hash())},
             {"corpus_hash", header.value("corpus_hash", "")},
             {"checkpoint_hash", header.value("checkpoint_hash", "")}};
    if (!cfg.paths.out.empty()) write_text(cfg.paths.out, out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
}

struct AblationCell {
    AblationMode mode;
    Refinement refinement;
    bool use_text;
};

json run_ablation_cells(const RunConfig& cfg, const Corpus& corpus, const Splits& splits,
                        const LmState& lm, const PromptTemplate& tpl,
                        const std::vector<AblationCell>& cells) {
    json rows = json::array();
    for (const AblationCell& cell : cells) {
        TrainConfig tc = apply_ablation(cfg.train, cell.mode, cell.refinement);
        tc.use_text = cell.use_text;
        tc.validate();
        std::optional<Checkpoint> ckpt;
        double final_loss = 0.0;
        if (tc.has_soft_prompts()) {
            TrainResult tr = train(corpus, splits, tc, lm, cfg.embedder, tpl);
            final_loss = tr.epoch_train_loss.back();
            ckpt = std::move(tr.best);
        }
        std::vector<PredictionRecord> preds =
            generate_predictions(corpus, splits.test, lm, ckpt ? &*ckpt : nullptr, tc,
                                 cfg.embedder, tpl, eval_options(cfg));
        MetricReport metrics = evaluate_predictions(preds);
        rows.push_back(json{{"mode", to_string(cell.mode)},
                            {"refinement", to_string(cell.refinement)},
                            {"use_text", cell.use_text},
                            {"final_train_loss", final_loss},
                            {"checkpoint_hash", ckpt ? to_hex(ckpt->content_hash) : ""},
                            {"metrics", metrics_to_json(metrics)}});
        std::cerr << "ablate " << to_string(cell.mode) << "/" << to_string(cell.refinement)
                  << (cell.use_text ? " w/ text" : " w/o text") << " rouge1_f1 "
                  << metrics.rouge.f1 << " meteor " << metrics.meteor << "\n";
    }
    return rows;
}

int cmd_ablate(const RunConfig& cfg, const std::string& grid) {
    if (cfg.paths.out.empty()) config_error("ablate needs --out report path");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    LmState lm = load_lm_checked(cfg);
    PromptTemplate tpl = template_for(cfg);

    std::vector<AblationCell> cells;
    if (grid == "table2" || grid == "both") {
        cells.push_back({AblationMode::NonPerso, Refinement::None, false});
        for (bool text : {false, true}) {
            cells.push_back({AblationMode::HisOnly, Refinement::Sae, text});
            cells.push_back({AblationMode::DiffOnly, Refinement::Sae, text});
            cells.push_back({AblationMode::HisDiff, Refinement::Sae, text});
        }
    }
    if (grid == "table3" || grid == "both") {
        for (bool text : {false, true}) {
            cells.push_back({AblationMode::HisDiff, Refinement::None, text});
            cells.push_back({AblationMode::HisDiff, Refinement::Ae, text});
            cells.push_back({AblationMode::HisDiff, Refinement::Sae, text});
        }
    }
    if (cells.empty()) config_error("ablate: unknown grid '" + grid + "'");

    json out{{"kind", "ablation"},
             {"grid", grid},
             {"rows", run_ablation_cells(cfg, corpus, splits, lm, tpl, cells)}};
    out.update(hashes_json(cfg, &corpus, nullptr));
    write_text(cfg.paths.out, out.dump(2) + "\n");
    std::cout << json{{"kind", "ablate"}, {"rows", out["rows"].size()}, {"out", cfg.paths.out}}.dump()
              << "\n";
    return kExitOk;
}

int cmd_sweep_k(const RunConfig& cfg, int k_max) {
    if (cfg.paths.out.empty()) config_error("sweep-k needs --out report path");
    if (k_max < 0) config_error("sweep-k: k-max must be >= 0");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    LmState lm = load_lm_checked(cfg);
    PromptTemplate tpl = template_for(cfg);

    TrainConfig tc = cfg.train;
    tc.k = std::max(tc.k, k_max);
    std::optional<Checkpoint> ckpt;
    if (tc.has_soft_prompts() && k_max > 0) {
        TrainResult tr = train(corpus, splits, tc, lm, cfg.embedder, tpl);
        ckpt = std::move(tr.best);
    }
    json rows = json::array();
    for (int k = 0; k <= k_max; ++k) {
        std::vector<PredictionRecord> preds =
            generate_predictions(corpus, splits.test, lm, ckpt ? &*ckpt : nullptr, tc,
                                 cfg.embedder, tpl, eval_options(cfg, k));
        MetricReport metrics = evaluate_predictions(preds);
        rows.push_back(json{{"k", k}, {"metrics", metrics_to_json(metrics)}});
        std::cerr << "sweep-k k=" << k << " rouge1_f1 " << metrics.rouge.f1 << "\n";
    }
    json out{{"kind", "sweep_k"}, {"rows", rows}};
    out.update(hashes_json(cfg, &corpus, ckpt ? &*ckpt : nullptr));
    write_text(cfg.paths.out, out.dump(2) + "\n");
    std::cout << json{{"kind", "sweep-k"}, {"rows", rows.size()}, {"out", cfg.paths.out}}.dump()
              << "\n";
    return kExitOk;
}

int cmd_uniqueness(const RunConfig& cfg) {
    if (cfg.paths.out.empty()) config_error("uniqueness needs --out report path");
    Corpus corpus = load_corpus(cfg);
    Splits splits = split(corpus, cfg.split_policy);
    LmState lm = load_lm_checked(cfg);
    PromptTemplate tpl = template_for(cfg);
    std::optional<Checkpoint> ckpt;
    TrainConfig tc = cfg.train;
    if (!cfg.paths.checkpoint.empty()) {
        ckpt = load_checkpoint(cfg.paths.checkpoint);
        tc = ckpt->config;
    } else if (tc.has_soft_prompts()) {
        config_error("uniqueness: soft-prompt modes need --checkpoint");
    }
    UniquenessSplit groups = uniqueness_split(corpus, cfg.embedder);
    std::vector<PredictionRecord> preds = generate_predictions(
        corpus, splits.test, lm, ckpt ? &*ckpt : nullptr, tc, cfg.embedder, tpl, eval_options(cfg));
    std::vector<PredictionRecord> unique_preds, non_unique_preds;
    for (const PredictionRecord& p : preds) {
        (groups.unique_users.count(p.user_id) ? unique_preds : non_unique_preds).push_back(p);
    }
    json out{{"kind", "uniqueness"},
             {"unique",
              {{"users", groups.unique_users.size()},
               {"metrics",
                metrics_to_json(unique_preds.empty() ? MetricReport{}
                                                     : evaluate_predictions(unique_preds))}}},
             {"non_unique",
              {{"users", groups.non_unique_users.size()},
               {"metrics",
                metrics_to_json(non_unique_preds.empty()
                                    ? MetricReport{}
                                    : evaluate_predictions(non_unique_preds))}}}};
    out.update(hashes_json(cfg, &corpus, ckpt ? &*ckpt : nullptr));
    write_text(cfg.paths.out, out.dump(2) + "\n");
    std::cout << json{{"kind", "uniqueness"}, {"out", cfg.paths.out}}.dump() << "\n";
    return kExitOk;
}

void print_metrics_row(std::ostream& os, const std::string& label, const json& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-28s rouge1_f1 %.4f  meteor %.4f  bleu %8.4f  (n=%d)",
                  label.c_str(), m["rouge1"]["f1"].get<double>(), m["meteor"].get<double>(),
                  m["bleu"].get<double>(), m["count"].get<int>());
    os << buf << "\n";
}

int cmd_report(const RunConfig& cfg, const std::string& in_path) {
    std::ifstream f(in_path);
    if (!f) throw DataError("cannot read report " + in_path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw DataError("report: invalid JSON in " + in_path);
    std::ostringstream os;
    const std::string kind = j.value("kind", "");
    if (kind == "evaluate") {
        os << "evaluation report\n";
        print_metrics_row(os, "all", j["metrics"]);
    } else if (kind == "ablation") {
        os << "ablation report (" << j.value("grid", "") << ")\n";
        for (const json& row : j["rows"]) {
            std::string label = row.value("mode", "") + "/" + row.value("refinement", "") +
                                (row.value("use_text", false) ? " w/text" : " w/o-text");
            print_metrics_row(os, label, row["metrics"]);
        }
    } else if (kind == "sweep_k") {
        os << "history-count sweep\n";
        for (const json& row : j["rows"]) {
            print_metrics_row(os, "K=" + std::to_string(row.value("k", 0)), row["metrics"]);
        }
    } else if (kind == "uniqueness") {
        os << "uniqueness report\n";
        print_metrics_row(os, "unique", j["unique"]["metrics"]);
        print_metrics_row(os, "non_unique", j["non_unique"]["metrics"]);
    } else {
        throw DataError("report: unrecognized kind '" + kind + "'");
    }
    os << "config " << j.value("config_hash", "") << "  corpus " << j.value("corpus_hash", "")
       << "  checkpoint " << j.value("checkpoint_hash", "") << "\n";
    if (!cfg.paths.out.empty()) write_text(cfg.paths.out, os.str());
    std::cout << os.str();
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"difference-aware embedding-based personalization pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path, preset;
    std::optional<std::uint64_t> seed_flag;

    // Flags shared by every subcommand; values land in `cfg` after the
    // config file and preset are applied.
    struct Common {
        std::optional<std::string> main, meta, tpl, lm, checkpoint, out, log;
        std::optional<int> k, threads, limit, val_size;
        std::optional<std::string> mode, refinement;
        std::optional<bool> no_text;
        std::optional<bool> greedy, sample;
    } common;

    auto add_common = [&](CLI::App* sub, bool wants_corpus) {
        sub->add_option("--config", config_path, "run-config JSON file");
        sub->add_option("--preset", preset, "desk or paper");
        sub->add_option("--seed", seed_flag, "master run seed");
        if (wants_corpus) {
            sub->add_option("--main", common.main, "main review file (JSONL)");
            sub->add_option("--meta", common.meta, "item metadata file (JSONL)");
        }
        sub->add_option("--template", common.tpl, "prompt template file");
        sub->add_option("--out", common.out, "output path");
        sub->add_option("--threads", common.threads, "worker threads for generation");
        sub->add_option("--val-size", common.val_size, "validation sample size");
        return sub;
    };

    CLI::App* ingest_cmd = add_common(app.add_subcommand("ingest", "validate and index a corpus"), true);
    CLI::App* synth_cmd = add_common(app.add_subcommand("synth", "generate a synthetic corpus"), true);
    std::optional<int> synth_users, synth_items, synth_rpu;
    std::optional<std::uint64_t> synth_seed;
    synth_cmd->add_option("--users", synth_users);
    synth_cmd->add_option("--items", synth_items);
    synth_cmd->add_option("--rpu", synth_rpu, "reviews per user");
    synth_cmd->add_option("--synth-seed", synth_seed);

    CLI::App* embed_cmd =
        add_common(app.add_subcommand("embed", "precompute diff representations"), true);
    CLI::App* pretrain_cmd =
        add_common(app.add_subcommand("pretrain-lm", "pretrain and freeze the toy LM"), true);
    std::optional<int> pre_steps, pre_k;
    std::optional<double> pre_lr;
    pretrain_cmd->add_option("--steps", pre_steps);
    pretrain_cmd->add_option("--pretrain-k", pre_k);
    pretrain_cmd->add_option("--lr", pre_lr);

    CLI::App* train_cmd = add_common(app.add_subcommand("train", "train SAE + projectors"), true);
    train_cmd->add_option("--lm", common.lm, "frozen LM file");
    train_cmd->add_option("--log", common.log, "per-step training log (JSONL)");
    train_cmd->add_option("--mode", common.mode, "ablation mode");
    train_cmd->add_option("--refinement", common.refinement, "none|ae|sae");
    train_cmd->add_option("--k", common.k);
    std::optional<int> train_epochs;
    std::optional<double> train_lr, train_gamma;
    train_cmd->add_option("--epochs", train_epochs);
    train_cmd->add_option("--lr", train_lr);
    train_cmd->add_option("--gamma", train_gamma);
    train_cmd->add_flag("--no-text,!--text", common.no_text, "drop retrieved review text");

    CLI::App* gen_cmd = add_common(app.add_subcommand("generate", "write predictions"), true);
    gen_cmd->add_option("--lm", common.lm);
    gen_cmd->add_option("--checkpoint", common.checkpoint);
    gen_cmd->add_option("--mode", common.mode);
    gen_cmd->add_option("--refinement", common.refinement);
    gen_cmd->add_option("--k", common.k);
    gen_cmd->add_option("--limit", common.limit);
    std::string gen_split = "test";
    gen_cmd->add_option("--split", gen_split, "train|validation|test");
    gen_cmd->add_flag("--greedy,!--sample", common.greedy, "greedy decoding (default)");
    std::optional<int> gen_max_new;
    gen_cmd->add_option("--max-new", gen_max_new);
    gen_cmd->add_flag("--no-text,!--text", common.no_text);

    CLI::App* eval_cmd = add_common(app.add_subcommand("evaluate", "score predictions"), false);
    std::string eval_predictions;
    eval_cmd->add_option("--predictions", eval_predictions)->required();

    CLI::App* ablate_cmd = add_common(app.add_subcommand("ablate", "run the ablation grids"), true);
    ablate_cmd->add_option("--lm", common.lm);
    std::string ablate_grid = "table2";
    ablate_cmd->add_option("--grid", ablate_grid, "table2|table3|both");
    std::optional<int> ablate_epochs;
    ablate_cmd->add_option("--epochs", ablate_epochs);
    ablate_cmd->add_option("--limit", common.limit);

    CLI::App* sweep_cmd = add_common(app.add_subcommand("sweep-k", "history-count sweep"), true);
    sweep_cmd->add_option("--lm", common.lm);
    int sweep_k_max = 8;
    sweep_cmd->add_option("--k-max", sweep_k_max);
    std::optional<int> sweep_epochs;
    sweep_cmd->add_option("--epochs", sweep_epochs);
    sweep_cmd->add_option("--limit", common.limit);

    CLI::App* uniq_cmd = add_common(app.add_subcommand("uniqueness", "unique-user study"), true);
    uniq_cmd->add_option("--lm", common.lm);
    uniq_cmd->add_option("--checkpoint", common.checkpoint);
    uniq_cmd->add_option("--limit", common.limit);

    CLI::App* report_cmd = add_common(app.add_subcommand("report", "render a report file"), false);
    std::string report_in;
    report_cmd->add_option("--in", report_in)->required();

    std::vector<std::string> argv_storage;
    argv_storage.push_back("dep");
    for (const std::string& a : args) argv_storage.push_back(a);
    std::vector<char*> argv;
    for (std::string& s : argv_storage) argv.push_back(s.data());

    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp& e) {
            std::cout << app.help();
            return kExitOk;
        } catch (const CLI::ParseError& e) {
            throw std::invalid_argument(e.what());
        }

        apply_preset(cfg, preset);
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw DataError("cannot read config " + config_path);
            json j = json::parse(f, nullptr, false);
            if (j.is_discarded()) config_error("config: invalid JSON in " + config_path);
            cfg = run_config_from_json(j, cfg);
        }
        if (seed_flag) {
            cfg.train.seed = *seed_flag;
            cfg.gen.seed = *seed_flag;
            cfg.split_policy.seed = *seed_flag;
        }
        if (common.main) cfg.paths.main = *common.main;
        if (common.meta) cfg.paths.meta = *common.meta;
        if (common.tpl) cfg.paths.template_path = *common.tpl;
        if (common.lm) cfg.paths.lm = *common.lm;
        if (common.checkpoint) cfg.paths.checkpoint = *common.checkpoint;
        if (common.out) cfg.paths.out = *common.out;
        if (common.log) cfg.paths.log = *common.log;
        if (common.threads) cfg.gen.threads = *common.threads;
        if (common.val_size) cfg.split_policy.validation_size = *common.val_size;
        if (common.limit) cfg.gen.limit = *common.limit;
        if (common.k) cfg.train.k = *common.k;
        if (common.greedy) cfg.gen.greedy = *common.greedy;
        if (gen_max_new) cfg.gen.max_new = *gen_max_new;
        if (common.mode && common.refinement) {
            cfg.train = apply_ablation(cfg.train, ablation_mode_from_string(*common.mode),
                                       refinement_from_string(*common.refinement));
        } else if (common.mode) {
            cfg.train = apply_ablation(cfg.train, ablation_mode_from_string(*common.mode),
                                       *common.mode == "non_perso" || *common.mode == "rag_text_only"
                                           ? Refinement::None
                                           : cfg.train.refinement);
        } else if (common.refinement) {
            cfg.train.refinement = refinement_from_string(*common.refinement);
        }
        if (common.no_text) cfg.train.use_text = !*common.no_text;
        if (train_epochs) cfg.train.epochs = *train_epochs;
        if (ablate_epochs) cfg.train.epochs = *ablate_epochs;
        if (sweep_epochs) cfg.train.epochs = *sweep_epochs;
        if (train_lr) cfg.train.lr = *train_lr;
        if (train_gamma) cfg.train.gamma = *train_gamma;
        if (synth_users) cfg.synth.users = *synth_users;
        if (synth_items) cfg.synth.items = *synth_items;
        if (synth_rpu) cfg.synth.reviews_per_user = *synth_rpu;
        if (synth_seed) cfg.synth.seed = *synth_seed;
        if (pre_steps) cfg.pretrain.steps = *pre_steps;
        if (pre_k) cfg.pretrain.k = *pre_k;
        if (pre_lr) cfg.pretrain.lr = *pre_lr;

        if (ingest_cmd->parsed()) return cmd_ingest(cfg);
        if (synth_cmd->parsed()) return cmd_synth(cfg);
        if (embed_cmd->parsed()) return cmd_embed(cfg);
        if (pretrain_cmd->parsed()) return cmd_pretrain_lm(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (gen_cmd->parsed()) {
            std::optional<bool> use_text_override;
            if (common.no_text) use_text_override = !*common.no_text;
            return cmd_generate(cfg, gen_split, common.k ? *common.k : -1, use_text_override);
        }
        if (eval_cmd->parsed()) return cmd_evaluate(cfg, eval_predictions);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg, ablate_grid);
        if (sweep_cmd->parsed()) return cmd_sweep_k(cfg, sweep_k_max);
        if (uniq_cmd->parsed()) return cmd_uniqueness(cfg);
        if (report_cmd->parsed()) return cmd_report(cfg, report_in);
        config_error("no subcommand given");
    } catch (const NumericError& e) {
        std::cerr << json{{"error", {{"code", kExitNumeric}, {"message", e.what()}}}}.dump() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", {{"code", kExitConfig}, {"message", e.what()}}}}.dump() << "\n";
        return kExitConfig;
    } catch (const std::logic_error& e) {
        std::cerr << json{{"error", {{"code", kExitConfig}, {"message", e.what()}}}}.dump() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"code", kExitData}, {"message", e.what()}}}}.dump() << "\n";
        return kExitData;
    }
    return kExitOk;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace dep
