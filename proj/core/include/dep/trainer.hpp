#pragma once

// Joint optimization of the SAE and projectors against
// L_total = L_gen + lambda * (L_recon + gamma * L_sparse) with the LM and
// embedder frozen; per-epoch validation by METEOR, checkpoint selection,
// ablation configurations, and the prediction/evaluation pipeline.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "dep/corpus.hpp"
#include "dep/diffrep.hpp"
#include "dep/embedder.hpp"
#include "dep/metrics.hpp"
#include "dep/projector.hpp"
#include "dep/sae.hpp"
#include "dep/toylm.hpp"

namespace dep {

// Raised when an optimization produces non-finite values; the CLI maps it
// to its own exit code.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Refinement { None, Ae, Sae };

std::string to_string(Refinement r);
Refinement refinement_from_string(const std::string& s);

struct TrainConfig {
    double lambda = 100.0;
    double gamma = 1e-3;
    double rho = 0.05;
    int k = 8;
    int m_max = 16;
    double lr = 1e-3;  // paper preset uses 1e-5
    double weight_decay = 0.025;
    double warmup_ratio = 0.01;
    int epochs = 5;
    int max_epochs = 8;
    int accum_steps = 16;
    std::uint64_t seed = 0;

    bool use_his = true;
    bool use_diff = true;
    bool use_text = true;
    Refinement refinement = Refinement::Sae;

    int embed_dim = 1024;
    int latent_dim = 512;
    int projector_hidden = 128;  // paper preset uses 512
    bool guidance = true;
    bool peers_before_target = false;
    int soft_tokens_per_slot = 1;
    int gen_reserve = 80;

    void validate() const;
    int projector_input_dim() const {
        return refinement == Refinement::None ? embed_dim : latent_dim;
    }
    bool has_soft_prompts() const { return use_his || use_diff; }
};

// L_gen + lambda * (L_recon + gamma * L_sparse).
double total_loss(double l_gen, double l_recon, double l_sparse, double lambda, double gamma);

// Xavier-uniform weights, zero biases, deterministic per seed. The SAE is
// omitted (default-constructed tensors) when refinement is None.
struct InitParams {
    SaeState sae;
    ProjectorState projector;
};
InitParams init_params(std::uint64_t seed, const TrainConfig& config, int lm_dim);

struct Checkpoint {
    TrainConfig config;
    int lm_dim = 0;
    SaeState sae;
    ProjectorState projector;
    std::vector<std::vector<double>> adam_m;
    std::vector<std::vector<double>> adam_v;
    std::int64_t adam_steps = 0;
    int epoch = 0;
    double val_metric = 0.0;
    std::uint64_t corpus_hash = 0;
    std::uint64_t lm_hash = 0;
    std::uint64_t content_hash = 0;

    std::vector<Tensor> trainable_parameters() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
std::uint64_t checkpoint_content_hash(const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// One prepared training/evaluation instance: the plan over kept histories
// and the matching embedding matrices.
struct InstanceBatch {
    PromptPlan plan;
    Tensor e_his;   // [n, embed_dim], constant; undefined when n == 0
    Tensor e_diff;  // [n, embed_dim], constant
    int n = 0;      // kept histories
    std::string user_id;
    std::string item_id;
    std::string reference;  // target review text
};

// Builds diffreps + prompt plan for one target. Training form when
// with_target; inference form (reserve applied) otherwise.
InstanceBatch prepare_instance(const Corpus& corpus, const EmbedderSpec& spec,
                               const PromptTemplate& tpl, const LmConfig& lm_config,
                               const TrainConfig& config, const TargetInstance& target,
                               bool with_target, int k_override = -1,
                               EmbedCache* cache = nullptr);

struct LossParts {
    Tensor gen;
    Tensor recon;   // undefined when the mode has no SAE
    Tensor sparse;  // undefined when gamma = 0 or no SAE
    Tensor total;
};

// Builds the instance's graph: encode/decode per refinement, project,
// inject, generation loss, combined objective.
LossParts instance_loss(const LmState& lm, const SaeState& sae, const ProjectorState& projector,
                        const InstanceBatch& batch, const TrainConfig& config);

// Slot matrix for a prepared instance under the checkpoint's states, built
// without recording gradients (inference path).
Tensor slot_matrix_for(const SaeState& sae, const ProjectorState& projector,
                       const InstanceBatch& batch, const TrainConfig& config);

struct StepLog {
    int step = 0;
    double l_gen = 0.0;
    double l_recon = 0.0;
    double l_sparse = 0.0;
    double l_total = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<StepLog> log;
    std::vector<double> epoch_train_loss;  // mean L_total per epoch
    std::vector<double> epoch_val_meteor;
};

using ProgressFn = std::function<void(const std::string&)>;

// Full training run: per-instance graphs, gradients accumulated over
// accum_steps micro-instances per optimizer step, AdamW with linear
// warmup, per-epoch greedy-decoded validation METEOR, highest-METEOR
// checkpoint returned. Aborts with the failing step number if L_total
// goes non-finite.
TrainResult train(const Corpus& corpus, const Splits& splits, const TrainConfig& config,
                  const LmState& lm, const EmbedderSpec& spec, const PromptTemplate& tpl,
                  const ProgressFn& progress = {});

struct EvalOptions {
    int k = -1;  // -1: use config.k
    bool greedy = true;
    double temperature = 0.8;
    double top_p = 0.95;
    int max_new = 96;
    std::uint64_t seed = 0;
    int limit = 0;  // 0: all instances
    int threads = 1;
};

struct PredictionRecord {
    std::string user_id;
    std::string item_id;
    std::string prediction;
    std::string reference;
};

// Generates predictions for the given targets. `checkpoint` may be null
// for modes with no soft prompts (non-perso / text-only RAG).
std::vector<PredictionRecord> generate_predictions(const Corpus& corpus,
                                                   const std::vector<TargetInstance>& targets,
                                                   const LmState& lm, const Checkpoint* checkpoint,
                                                   const TrainConfig& config,
                                                   const EmbedderSpec& spec,
                                                   const PromptTemplate& tpl,
                                                   const EvalOptions& options);

MetricReport evaluate_predictions(const std::vector<PredictionRecord>& predictions);

// Named ablation rows of the embedding-configuration and representation-
// refinement studies.
enum class AblationMode { NonPerso, RagTextOnly, HisOnly, DiffOnly, HisDiff, HisDiffNoText };

std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

// Applies the mode's flag set to a base config; throws on invalid
// combinations (a refinement stage with zero embedding sources).
TrainConfig apply_ablation(TrainConfig base, AblationMode mode, Refinement refinement);

struct AblationRow {
    std::string mode;
    std::string refinement;
    bool use_text = false;
    MetricReport metrics;
    double final_train_loss = 0.0;
};

}  // namespace dep
