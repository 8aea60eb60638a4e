#pragma once

// Small frozen decoder-only transformer over a byte-level vocabulary plus
// prompt-structure specials. Prompts are assembled from a plain-text
// template; soft prompt vectors replace the placeholder SLOT tokens'
// embeddings at designated positions, and gradients flow back to those
// vectors while the LM parameters stay fixed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dep/corpus.hpp"
#include "dep/tensor.hpp"

namespace dep {

// Byte values occupy 0..255; specials follow.
enum SpecialToken : int {
    kPad = 256,
    kBos = 257,
    kEos = 258,
    kHisStart = 259,
    kHisEnd = 260,
    kDiffStart = 261,
    kDiffEnd = 262,
    kHisSlot = 263,
    kDiffSlot = 264,
};
constexpr int kVocabSize = 265;

struct LmConfig {
    int d_lm = 64;
    int layers = 2;
    int heads = 2;
    int context = 512;
    std::uint64_t seed = 1;

    void validate() const;
    std::uint64_t content_hash() const;
};

struct LmLayer {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv;
    Tensor wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w_mlp1, b_mlp1;  // [4*d, d]
    Tensor w_mlp2, b_mlp2;  // [d, 4*d]
};

struct LmState {
    LmConfig config;
    Tensor tok_emb;  // [vocab, d]
    Tensor pos_emb;  // [context, d]
    std::vector<LmLayer> blocks;
    Tensor lnf_g, lnf_b;
    Tensor w_head;  // [vocab, d]

    std::vector<Tensor> parameters() const;
    void set_trainable(bool trainable);
};

// Seeded deterministic initialization; parameters are frozen
// (requires_grad = false) until pretraining flips them on and back off.
LmState make_lm(const LmConfig& config);

std::uint64_t lm_param_hash(const LmState& state);

enum class SlotKind { His, Diff };

struct SlotRef {
    int position = 0;
    SlotKind kind = SlotKind::His;
    int history_index = 0;
};

struct PromptPlan {
    std::vector<int> tokens;
    std::vector<SlotRef> slots;
    int target_begin = 0;  // [begin, end): supervised positions (bytes + EOS)
    int target_end = 0;
    int kept_histories = 0;

    bool has_target() const { return target_end > target_begin; }
};

// Sections of the external prompt template file. [system] and [guidance]
// lead the prompt; for each retrieved history [history_text] and
// [history_tokens] render per the flags; [input] carries the target item
// fields and the {histories} expansion point.
struct PromptTemplate {
    std::string system;
    std::string guidance;
    std::string history_text;
    std::string history_tokens;
    std::string input;
};

PromptTemplate parse_prompt_template(const std::string& text);
PromptTemplate load_prompt_template(const std::string& path);
const std::string& default_prompt_template_text();

struct PromptFlags {
    bool use_text = true;
    bool use_his = true;
    bool use_diff = true;
    bool guidance = true;
    int soft_tokens_per_slot = 1;
};

// Deterministic layout: system (+guidance), input block with per-history
// expansions most recent first, trailing "..." trigger, then BOS. Training
// form appends the target bytes + EOS as the supervised span. Whole
// trailing histories are dropped (never split) until the plan fits in
// context minus reserve_tokens; a training target that still overflows is
// truncated, keeping its EOS.
PromptPlan assemble_prompt(const PromptTemplate& tpl, const LmConfig& config, const Item& item,
                           const std::string& output_title, double rating,
                           const RetrievedHistory& histories, const PromptFlags& flags,
                           const std::optional<std::string>& target_text,
                           int reserve_tokens = 0);

// Token-table lookups with slot rows replaced by slot_matrix rows (row k
// belongs to plan.slots[k]), causal self-attention, logits per position.
// pos_offset shifts the positional rows used (training windows sample it
// so every positional row gets gradient).
Tensor lm_logits(const LmState& state, const std::vector<int>& tokens,
                 const std::vector<int>& slot_positions, const Tensor& slot_matrix,
                 int pos_offset = 0);

// Mean cross-entropy over the supervised span predicting each next token.
// Gradients reach slot_matrix but never LmState.
Tensor forward_loss(const LmState& state, const PromptPlan& plan, const Tensor& slot_matrix);

struct SampleOptions {
    int max_new = 256;
    double temperature = 0.8;
    double top_p = 0.95;
    bool greedy = false;
    std::uint64_t seed = 0;
};

// Full-vocabulary sampling distribution after nucleus filtering then
// temperature scaling of the kept probabilities.
std::vector<double> sample_distribution(const std::vector<double>& logits_row, double top_p,
                                        double temperature);

// Autoregressive sampling from the inference-form plan; stops at EOS,
// max_new, or the context limit, then byte-decodes with invalid-sequence
// replacement (U+FFFD).
std::string generate(const LmState& state, const PromptPlan& plan, const Tensor& slot_matrix,
                     const SampleOptions& options);

std::string decode_bytes(const std::vector<int>& tokens);

struct PretrainOptions {
    int steps = 4000;
    int k = 3;  // histories rendered into each pretraining sequence
    double lr = 1e-3;
    int warmup_steps = 50;
    std::uint64_t seed = 11;
};

// Next-byte training over the corpus review texts rendered in the same
// retrieval layout the model is frozen into: every review becomes a
// target with its K most recent sibling reviews as plain-text history (no
// soft prompts), and the whole token sequence is supervised. steps = 0
// returns the seeded initial state untouched.
LmState pretrain_frozen(const Corpus& corpus, const LmConfig& config, const PromptTemplate& tpl,
                        const PretrainOptions& options);

// Mean next-byte loss of the frozen LM over the first `count` pretraining
// sequences of `corpus`; pass a corpus the LM never saw for a held-out
// reading.
double lm_heldout_loss(const LmState& state, const Corpus& corpus, const PromptTemplate& tpl,
                       int count, int k = 3);

}  // namespace dep
