#include "dep/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "dep/hash.hpp"
#include "dep/optim.hpp"
#include "dep/serialize.hpp"
#include "dep/trainer_json.hpp"

namespace dep {

std::string to_string(Refinement r) {
    switch (r) {
        case Refinement::None: return "none";
        case Refinement::Ae: return "ae";
        case Refinement::Sae: return "sae";
    }
    return "sae";
}

Refinement refinement_from_string(const std::string& s) {
    if (s == "none") return Refinement::None;
    if (s == "ae") return Refinement::Ae;
    if (s == "sae") return Refinement::Sae;
    throw std::invalid_argument("unknown refinement: " + s);
}

std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::NonPerso: return "non_perso";
        case AblationMode::RagTextOnly: return "rag_text_only";
        case AblationMode::HisOnly: return "his_only";
        case AblationMode::DiffOnly: return "diff_only";
        case AblationMode::HisDiff: return "his_diff";
        case AblationMode::HisDiffNoText: return "his_diff_no_text";
    }
    return "his_diff";
}

AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "non_perso") return AblationMode::NonPerso;
    if (s == "rag_text_only") return AblationMode::RagTextOnly;
    if (s == "his_only") return AblationMode::HisOnly;
    if (s == "diff_only") return AblationMode::DiffOnly;
    if (s == "his_diff") return AblationMode::HisDiff;
    if (s == "his_diff_no_text") return AblationMode::HisDiffNoText;
    throw std::invalid_argument("unknown ablation mode: " + s);
}

void TrainConfig::validate() const {
    if (lambda < 0.0 || gamma < 0.0) throw std::invalid_argument("lambda/gamma must be >= 0");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
    if (epochs < 1 || max_epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (accum_steps < 1) throw std::invalid_argument("accum_steps must be >= 1");
    if (k < 0 || m_max < 0) throw std::invalid_argument("k/m_max must be >= 0");
    if (embed_dim < 1 || latent_dim < 1 || projector_hidden < 1) {
        throw std::invalid_argument("dimensions must be positive");
    }
    if (!has_soft_prompts() && refinement != Refinement::None) {
        throw std::invalid_argument("invalid combination: refinement with zero embedding sources");
    }
}

double total_loss(double l_gen, double l_recon, double l_sparse, double lambda, double gamma) {
    return l_gen + lambda * (l_recon + gamma * l_sparse);
}

InitParams init_params(std::uint64_t seed, const TrainConfig& config, int lm_dim) {
    InitParams out;
    Rng rng(derive_seed(seed, "init-params"));
    if (config.refinement != Refinement::None) {
        out.sae = make_sae(config.embed_dim, config.latent_dim, true);
        xavier_uniform(out.sae.w_enc, rng);
        xavier_uniform(out.sae.w_dec, rng);
    }
    out.projector =
        make_projector(config.projector_input_dim(), config.projector_hidden, lm_dim, true);
    xavier_uniform(out.projector.his.w1, rng);
    xavier_uniform(out.projector.his.w2, rng);
    xavier_uniform(out.projector.diff.w1, rng);
    xavier_uniform(out.projector.diff.w2, rng);
    return out;
}

std::vector<Tensor> Checkpoint::trainable_parameters() const {
    std::vector<Tensor> params;
    if (config.refinement != Refinement::None) {
        for (const Tensor& t : sae.parameters()) params.push_back(t);
    }
    for (const Tensor& t : projector.parameters()) params.push_back(t);
    return params;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{{"lambda", c.lambda},
                          {"gamma", c.gamma},
                          {"rho", c.rho},
                          {"k", c.k},
                          {"m_max", c.m_max},
                          {"lr", c.lr},
                          {"weight_decay", c.weight_decay},
                          {"warmup_ratio", c.warmup_ratio},
                          {"epochs", c.epochs},
                          {"max_epochs", c.max_epochs},
                          {"accum_steps", c.accum_steps},
                          {"seed", c.seed},
                          {"use_his", c.use_his},
                          {"use_diff", c.use_diff},
                          {"use_text", c.use_text},
                          {"refinement", to_string(c.refinement)},
                          {"embed_dim", c.embed_dim},
                          {"latent_dim", c.latent_dim},
                          {"projector_hidden", c.projector_hidden},
                          {"guidance", c.guidance},
                          {"peers_before_target", c.peers_before_target},
                          {"soft_tokens_per_slot", c.soft_tokens_per_slot},
                          {"gen_reserve", c.gen_reserve}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw std::invalid_argument("train config: expected an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "lambda") c.lambda = value.get<double>();
        else if (key == "gamma") c.gamma = value.get<double>();
        else if (key == "rho") c.rho = value.get<double>();
        else if (key == "k") c.k = value.get<int>();
        else if (key == "m_max") c.m_max = value.get<int>();
        else if (key == "lr") c.lr = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "warmup_ratio") c.warmup_ratio = value.get<double>();
        else if (key == "epochs") c.epochs = value.get<int>();
        else if (key == "max_epochs") c.max_epochs = value.get<int>();
        else if (key == "accum_steps") c.accum_steps = value.get<int>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "use_his") c.use_his = value.get<bool>();
        else if (key == "use_diff") c.use_diff = value.get<bool>();
        else if (key == "use_text") c.use_text = value.get<bool>();
        else if (key == "refinement") c.refinement = refinement_from_string(value.get<std::string>());
        else if (key == "embed_dim") c.embed_dim = value.get<int>();
        else if (key == "latent_dim") c.latent_dim = value.get<int>();
        else if (key == "projector_hidden") c.projector_hidden = value.get<int>();
        else if (key == "guidance") c.guidance = value.get<bool>();
        else if (key == "peers_before_target") c.peers_before_target = value.get<bool>();
        else if (key == "soft_tokens_per_slot") c.soft_tokens_per_slot = value.get<int>();
        else if (key == "gen_reserve") c.gen_reserve = value.get<int>();
        else throw std::invalid_argument("train config: unknown key '" + key + "'");
    }
    return c;
}

namespace {

nlohmann::json checkpoint_manifest(const Checkpoint& ckpt) {
    return nlohmann::json{{"format", "DEPCK"},
                          {"version", 1},
                          {"config", train_config_to_json(ckpt.config)},
                          {"lm_dim", ckpt.lm_dim},
                          {"epoch", ckpt.epoch},
                          {"val_metric", ckpt.val_metric},
                          {"adam_steps", ckpt.adam_steps},
                          {"corpus_hash", to_hex(ckpt.corpus_hash)},
                          {"lm_hash", to_hex(ckpt.lm_hash)}};
}

BlobWriter checkpoint_writer(const Checkpoint& ckpt) {
    BlobWriter w(checkpoint_manifest(ckpt));
    for (const Tensor& t : ckpt.trainable_parameters()) w.add(t);
    for (const auto& m : ckpt.adam_m) w.add_raw(m);
    for (const auto& v : ckpt.adam_v) w.add_raw(v);
    return w;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    checkpoint_writer(ckpt).write(path);
}

std::uint64_t checkpoint_content_hash(const Checkpoint& ckpt) {
    return checkpoint_writer(ckpt).content_hash();
}

Checkpoint load_checkpoint(const std::string& path) {
    BlobReader r(path);
    const nlohmann::json& m = r.manifest();
    if (m.value("format", std::string()) != "DEPCK" || m.value("version", 0) != 1) {
        throw std::runtime_error("checkpoint: unsupported format");
    }
    Checkpoint ckpt;
    ckpt.config = train_config_from_json(m.at("config"));
    ckpt.lm_dim = m.at("lm_dim").get<int>();
    ckpt.epoch = m.at("epoch").get<int>();
    ckpt.val_metric = m.at("val_metric").get<double>();
    ckpt.adam_steps = m.at("adam_steps").get<std::int64_t>();
    ckpt.corpus_hash = std::stoull(m.at("corpus_hash").get<std::string>(), nullptr, 16);
    ckpt.lm_hash = std::stoull(m.at("lm_hash").get<std::string>(), nullptr, 16);
    ckpt.content_hash = std::stoull(m.at("content_hash").get<std::string>(), nullptr, 16);

    InitParams shapes = init_params(0, ckpt.config, ckpt.lm_dim);
    ckpt.sae = shapes.sae;
    ckpt.projector = shapes.projector;
    std::vector<Tensor> params = ckpt.trainable_parameters();
    for (Tensor& t : params) r.read_into(t);
    ckpt.adam_m.clear();
    ckpt.adam_v.clear();
    for (std::size_t i = 0; i < params.size(); ++i) ckpt.adam_m.push_back(r.read_raw());
    for (std::size_t i = 0; i < params.size(); ++i) ckpt.adam_v.push_back(r.read_raw());
    return ckpt;
}

InstanceBatch prepare_instance(const Corpus& corpus, const EmbedderSpec& spec,
                               const PromptTemplate& tpl, const LmConfig& lm_config,
                               const TrainConfig& config, const TargetInstance& target,
                               bool with_target, int k_override, EmbedCache* cache) {
    const Review& review = corpus.reviews()[static_cast<std::size_t>(target.review_index)];
    const Item* item = corpus.find_item(review.item_id);
    if (item == nullptr) throw std::logic_error("prepare_instance: target item missing");

    const int k_eff = k_override >= 0 ? k_override : config.k;
    RetrievedHistory histories = corpus.retrieve_recent(review.user_id, review.item_id, k_eff);

    PromptFlags flags;
    flags.use_text = config.use_text;
    flags.use_his = config.use_his;
    flags.use_diff = config.use_diff;
    flags.guidance = config.guidance;
    flags.soft_tokens_per_slot = config.soft_tokens_per_slot;

    InstanceBatch batch;
    batch.user_id = review.user_id;
    batch.item_id = review.item_id;
    batch.reference = review.text;
    batch.plan = assemble_prompt(tpl, lm_config, *item, review.title, review.rating, histories,
                                 flags, with_target ? std::optional<std::string>(review.text)
                                                    : std::nullopt,
                                 config.gen_reserve);
    batch.n = batch.plan.kept_histories;

    if (batch.n > 0 && config.has_soft_prompts()) {
        DiffRepOptions opts;
        opts.k = k_eff;
        opts.m_max = config.m_max;
        opts.peers_before_target = config.peers_before_target;
        std::vector<DiffRepresentation> reps =
            build_all(corpus, spec, review.user_id, review.item_id, opts, cache);
        const std::size_t dim = static_cast<std::size_t>(config.embed_dim);
        std::vector<double> his_data, diff_data;
        his_data.reserve(static_cast<std::size_t>(batch.n) * dim);
        diff_data.reserve(static_cast<std::size_t>(batch.n) * dim);
        for (int i = 0; i < batch.n; ++i) {
            const DiffRepresentation& rep = reps[static_cast<std::size_t>(i)];
            his_data.insert(his_data.end(), rep.e_his.begin(), rep.e_his.end());
            diff_data.insert(diff_data.end(), rep.e_diff.begin(), rep.e_diff.end());
        }
        batch.e_his = Tensor::from_data({batch.n, config.embed_dim}, std::move(his_data));
        batch.e_diff = Tensor::from_data({batch.n, config.embed_dim}, std::move(diff_data));
    }
    return batch;
}

namespace {

struct StreamOut {
    Tensor projected;  // [n, d_lm]
    Tensor recon;      // undefined if no SAE
    Tensor sparse;     // undefined if not SAE refinement
};

StreamOut run_stream(const SaeState& sae, const ProjectorState& projector, const Tensor& e,
                     bool his_stream, const TrainConfig& config) {
    StreamOut out;
    if (config.refinement == Refinement::None) {
        out.projected = his_stream ? project_his(projector, e) : project_diff(projector, e);
        return out;
    }
    Tensor z = sae_encode(sae, e);
    Tensor e_hat = sae_decode(sae, z);
    out.recon = recon_loss_single(e, e_hat);
    if (config.refinement == Refinement::Sae) {
        out.sparse = sparsity_loss_single(z, config.rho);
    }
    out.projected = his_stream ? project_his(projector, z) : project_diff(projector, z);
    return out;
}

Tensor build_slot_matrix(const PromptPlan& plan, const Tensor& p_his, const Tensor& p_diff) {
    std::vector<Tensor> sources;
    int his_src = -1, diff_src = -1;
    if (p_his.defined()) {
        his_src = static_cast<int>(sources.size());
        sources.push_back(p_his);
    }
    if (p_diff.defined()) {
        diff_src = static_cast<int>(sources.size());
        sources.push_back(p_diff);
    }
    std::vector<std::pair<int, int>> picks;
    picks.reserve(plan.slots.size());
    for (const SlotRef& s : plan.slots) {
        const int src = s.kind == SlotKind::His ? his_src : diff_src;
        if (src < 0) throw std::logic_error("slot matrix: slot kind has no projected stream");
        picks.emplace_back(src, s.history_index);
    }
    return num::compose_rows(sources, picks);
}

}  // namespace

LossParts instance_loss(const LmState& lm, const SaeState& sae, const ProjectorState& projector,
                        const InstanceBatch& batch, const TrainConfig& config) {
    LossParts parts;
    Tensor slot_matrix;
    if (batch.n > 0 && config.has_soft_prompts() && !batch.plan.slots.empty()) {
        Tensor p_his, p_diff;
        if (config.use_his) {
            StreamOut s = run_stream(sae, projector, batch.e_his, true, config);
            p_his = s.projected;
            parts.recon = s.recon;
            parts.sparse = s.sparse;
        }
        if (config.use_diff) {
            StreamOut s = run_stream(sae, projector, batch.e_diff, false, config);
            p_diff = s.projected;
            parts.recon = parts.recon.defined() && s.recon.defined()
                              ? num::add(parts.recon, s.recon)
                              : (s.recon.defined() ? s.recon : parts.recon);
            parts.sparse = parts.sparse.defined() && s.sparse.defined()
                               ? num::add(parts.sparse, s.sparse)
                               : (s.sparse.defined() ? s.sparse : parts.sparse);
        }
        slot_matrix = build_slot_matrix(batch.plan, p_his, p_diff);
    }
    parts.gen = forward_loss(lm, batch.plan, slot_matrix);

    Tensor total = parts.gen;
    if (parts.recon.defined()) {
        Tensor inner = parts.recon;
        if (parts.sparse.defined()) {
            inner = num::add(inner, num::scale(parts.sparse, config.gamma));
        }
        total = num::add(total, num::scale(inner, config.lambda));
    }
    parts.total = total;
    return parts;
}

Tensor slot_matrix_for(const SaeState& sae, const ProjectorState& projector,
                       const InstanceBatch& batch, const TrainConfig& config) {
    if (batch.plan.slots.empty()) return Tensor();
    NoGradGuard no_grad;
    Tensor p_his, p_diff;
    if (config.use_his) {
        p_his = run_stream(sae, projector, batch.e_his, true, config).projected;
    }
    if (config.use_diff) {
        p_diff = run_stream(sae, projector, batch.e_diff, false, config).projected;
    }
    return build_slot_matrix(batch.plan, p_his, p_diff);
}

namespace {

SaeState clone_sae(const SaeState& s) {
    if (!s.w_enc.defined()) return SaeState{};
    SaeState out;
    auto clone = [](const Tensor& t) {
        return Tensor::from_data(t.shape(), std::vector<double>(t.data().begin(), t.data().end()),
                                 true);
    };
    out.w_enc = clone(s.w_enc);
    out.b_enc = clone(s.b_enc);
    out.w_dec = clone(s.w_dec);
    out.b_dec = clone(s.b_dec);
    return out;
}

ProjectorState clone_projector(const ProjectorState& p) {
    auto clone = [](const Tensor& t) {
        return Tensor::from_data(t.shape(), std::vector<double>(t.data().begin(), t.data().end()),
                                 true);
    };
    ProjectorState out;
    out.his = Mlp2{clone(p.his.w1), clone(p.his.b1), clone(p.his.w2), clone(p.his.b2)};
    out.diff = Mlp2{clone(p.diff.w1), clone(p.diff.b1), clone(p.diff.w2), clone(p.diff.b2)};
    return out;
}

}  // namespace

TrainResult train(const Corpus& corpus, const Splits& splits, const TrainConfig& config,
                  const LmState& lm, const EmbedderSpec& spec, const PromptTemplate& tpl,
                  const ProgressFn& progress) {
    config.validate();
    if (splits.train.empty()) throw std::invalid_argument("train: empty train split");

    const int epochs = std::min(config.epochs, config.max_epochs);
    InitParams params = init_params(config.seed, config, lm.config.d_lm);

    std::vector<Tensor> trainable;
    if (config.refinement != Refinement::None) {
        for (const Tensor& t : params.sae.parameters()) trainable.push_back(t);
    }
    for (const Tensor& t : params.projector.parameters()) trainable.push_back(t);

    const std::int64_t total_micro =
        static_cast<std::int64_t>(splits.train.size()) * static_cast<std::int64_t>(epochs);
    const std::int64_t optimizer_steps =
        (total_micro + config.accum_steps - 1) / config.accum_steps;
    AdamWOptions adam_opt;
    adam_opt.lr = config.lr;
    adam_opt.weight_decay = config.weight_decay;
    adam_opt.warmup_steps =
        std::max<int>(1, static_cast<int>(std::llround(config.warmup_ratio *
                                                       static_cast<double>(optimizer_steps))));
    AdamW optimizer(trainable, adam_opt);

    // Instances are config-fixed; prepare them once.
    EmbedCache cache(spec);
    std::vector<InstanceBatch> train_batches;
    train_batches.reserve(splits.train.size());
    for (const TargetInstance& t : splits.train) {
        train_batches.push_back(
            prepare_instance(corpus, spec, tpl, lm.config, config, t, true, -1, &cache));
    }

    TrainResult result;
    int step_counter = 0;
    double best_metric = -1.0;
    bool have_best = false;

    auto snapshot = [&](int epoch, double metric) {
        Checkpoint ckpt;
        ckpt.config = config;
        ckpt.lm_dim = lm.config.d_lm;
        ckpt.sae = clone_sae(params.sae);
        ckpt.projector = clone_projector(params.projector);
        ckpt.adam_m = optimizer.first_moments();
        ckpt.adam_v = optimizer.second_moments();
        ckpt.adam_steps = optimizer.steps_taken();
        ckpt.epoch = epoch;
        ckpt.val_metric = metric;
        ckpt.corpus_hash = corpus.content_hash();
        ckpt.lm_hash = lm_param_hash(lm);
        ckpt.content_hash = checkpoint_content_hash(ckpt);
        result.best = std::move(ckpt);
    };

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::vector<std::size_t> order(train_batches.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(config.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(shuffle_rng.next_below(i));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        int micro = 0;
        double acc_gen = 0.0, acc_recon = 0.0, acc_sparse = 0.0, acc_total = 0.0;

        auto flush = [&]() {
            if (micro == 0) return;
            const double lr_now = optimizer.current_lr();
            optimizer.step(1.0 / static_cast<double>(micro));
            ++step_counter;
            const double inv = 1.0 / static_cast<double>(micro);
            result.log.push_back(StepLog{step_counter, acc_gen * inv, acc_recon * inv,
                                         acc_sparse * inv, acc_total * inv, lr_now});
            micro = 0;
            acc_gen = acc_recon = acc_sparse = acc_total = 0.0;
        };

        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const InstanceBatch& batch = train_batches[order[pos]];
            GradGraph graph;
            GraphScope scope(graph);
            LossParts parts = instance_loss(lm, params.sae, params.projector, batch, config);
            const double l_total = parts.total.item();
            if (!std::isfinite(l_total)) {
                throw NumericError("train: L_total is not finite at optimizer step " +
                                         std::to_string(step_counter + 1));
            }
            epoch_loss += l_total;
            acc_gen += parts.gen.item();
            acc_recon += parts.recon.defined() ? parts.recon.item() : 0.0;
            acc_sparse += parts.sparse.defined() ? parts.sparse.item() : 0.0;
            acc_total += l_total;
            if (parts.total.requires_grad()) {
                graph.backward(parts.total);
            }
            ++micro;
            if (micro == config.accum_steps) flush();
        }
        flush();
        result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

        // Greedy-decoded validation METEOR picks the checkpoint.
        double met = 0.0;
        if (!splits.validation.empty()) {
            Checkpoint current;
            current.config = config;
            current.lm_dim = lm.config.d_lm;
            current.sae = params.sae;
            current.projector = params.projector;
            EvalOptions val_opts;
            val_opts.greedy = true;
            val_opts.seed = config.seed;
            std::vector<PredictionRecord> preds = generate_predictions(
                corpus, splits.validation, lm, &current, config, spec, tpl, val_opts);
            for (const PredictionRecord& p : preds) met += meteor_lite(p.prediction, p.reference);
            met /= static_cast<double>(preds.size());
        }
        result.epoch_val_meteor.push_back(met);
        if (!have_best || met > best_metric || splits.validation.empty()) {
            best_metric = met;
            have_best = true;
            snapshot(epoch, met);
        }
        if (progress) {
            progress("epoch " + std::to_string(epoch) + "/" + std::to_string(epochs) +
                     " train_loss " + std::to_string(result.epoch_train_loss.back()) +
                     " val_meteor " + std::to_string(met));
        }
    }
    return result;
}

std::vector<PredictionRecord> generate_predictions(const Corpus& corpus,
                                                   const std::vector<TargetInstance>& targets,
                                                   const LmState& lm, const Checkpoint* checkpoint,
                                                   const TrainConfig& config,
                                                   const EmbedderSpec& spec,
                                                   const PromptTemplate& tpl,
                                                   const EvalOptions& options) {
    std::size_t count = targets.size();
    if (options.limit > 0) count = std::min<std::size_t>(count, static_cast<std::size_t>(options.limit));
    std::vector<PredictionRecord> out(count);
    if (count == 0) return out;
    if (config.has_soft_prompts() && checkpoint == nullptr) {
        throw std::invalid_argument("generate_predictions: mode needs a checkpoint");
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        EmbedCache cache(spec);
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            InstanceBatch batch = prepare_instance(corpus, spec, tpl, lm.config, config,
                                                   targets[i], false, options.k, &cache);
            Tensor slots;
            if (!batch.plan.slots.empty()) {
                slots = slot_matrix_for(checkpoint->sae, checkpoint->projector, batch, config);
            }
            SampleOptions sample;
            sample.max_new = options.max_new;
            sample.temperature = options.temperature;
            sample.top_p = options.top_p;
            sample.greedy = options.greedy;
            sample.seed = derive_seed(options.seed, "gen", static_cast<std::uint64_t>(i));
            PredictionRecord rec;
            rec.user_id = batch.user_id;
            rec.item_id = batch.item_id;
            rec.reference = batch.reference;
            rec.prediction = generate(lm, batch.plan, slots, sample);
            out[i] = std::move(rec);
        }
    };

    const int threads = std::max(1, options.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

MetricReport evaluate_predictions(const std::vector<PredictionRecord>& predictions) {
    std::vector<std::string> cands, refs;
    cands.reserve(predictions.size());
    refs.reserve(predictions.size());
    for (const PredictionRecord& p : predictions) {
        cands.push_back(p.prediction);
        refs.push_back(p.reference);
    }
    return score_all(cands, refs);
}

TrainConfig apply_ablation(TrainConfig base, AblationMode mode, Refinement refinement) {
    switch (mode) {
        case AblationMode::NonPerso:
            base.use_text = base.use_his = base.use_diff = false;
            break;
        case AblationMode::RagTextOnly:
            base.use_text = true;
            base.use_his = base.use_diff = false;
            break;
        case AblationMode::HisOnly:
            base.use_text = true;
            base.use_his = true;
            base.use_diff = false;
            break;
        case AblationMode::DiffOnly:
            base.use_text = true;
            base.use_his = false;
            base.use_diff = true;
            break;
        case AblationMode::HisDiff:
            base.use_text = true;
            base.use_his = base.use_diff = true;
            break;
        case AblationMode::HisDiffNoText:
            base.use_text = false;
            base.use_his = base.use_diff = true;
            break;
    }
    base.refinement = refinement;
    base.validate();  // rejects refinement with zero embedding sources
    return base;
}

}  // namespace dep
