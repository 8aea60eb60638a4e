#include "dep/toylm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dep/hash.hpp"
#include "dep/optim.hpp"

namespace dep {

void LmConfig::validate() const {
    if (d_lm < 1 || layers < 1 || heads < 1 || context < 8) {
        throw std::invalid_argument("LmConfig: dimensions must be positive");
    }
    if (d_lm % heads != 0) {
        throw std::invalid_argument("LmConfig: d_lm must be divisible by heads");
    }
}

std::uint64_t LmConfig::content_hash() const {
    HashAccumulator h;
    h.update("lm-config-v1");
    h.update_u64(static_cast<std::uint64_t>(d_lm));
    h.update_u64(static_cast<std::uint64_t>(layers));
    h.update_u64(static_cast<std::uint64_t>(heads));
    h.update_u64(static_cast<std::uint64_t>(context));
    h.update_u64(seed);
    return h.digest();
}

std::vector<Tensor> LmState::parameters() const {
    std::vector<Tensor> out{tok_emb, pos_emb};
    for (const LmLayer& l : blocks) {
        for (const Tensor& t : {l.ln1_g, l.ln1_b, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo,
                                l.ln2_g, l.ln2_b, l.w_mlp1, l.b_mlp1, l.w_mlp2, l.b_mlp2}) {
            out.push_back(t);
        }
    }
    out.push_back(lnf_g);
    out.push_back(lnf_b);
    out.push_back(w_head);
    return out;
}

void LmState::set_trainable(bool trainable) {
    for (Tensor t : parameters()) t.impl()->requires_grad = trainable;
}

LmState make_lm(const LmConfig& config) {
    config.validate();
    LmState s;
    s.config = config;
    const int d = config.d_lm;
    Rng rng(derive_seed(config.seed, "lm-init"));

    auto normal_fill = [&rng](Tensor& t, double sigma) {
        auto data = t.mutable_data();
        for (double& x : data) x = rng.next_gauss(0.0, sigma);
    };
    auto ones = [](Tensor& t) {
        auto data = t.mutable_data();
        std::fill(data.begin(), data.end(), 1.0);
    };

    s.tok_emb = Tensor::zeros({kVocabSize, d});
    normal_fill(s.tok_emb, 0.02);
    s.pos_emb = Tensor::zeros({config.context, d});
    normal_fill(s.pos_emb, 0.02);

    s.blocks.resize(static_cast<std::size_t>(config.layers));
    for (LmLayer& l : s.blocks) {
        l.ln1_g = Tensor::zeros({d});
        ones(l.ln1_g);
        l.ln1_b = Tensor::zeros({d});
        l.wq = Tensor::zeros({d, d});
        xavier_uniform(l.wq, rng);
        l.bq = Tensor::zeros({d});
        l.wk = Tensor::zeros({d, d});
        xavier_uniform(l.wk, rng);
        l.bk = Tensor::zeros({d});
        l.wv = Tensor::zeros({d, d});
        xavier_uniform(l.wv, rng);
        l.bv = Tensor::zeros({d});
        l.wo = Tensor::zeros({d, d});
        xavier_uniform(l.wo, rng);
        l.bo = Tensor::zeros({d});
        l.ln2_g = Tensor::zeros({d});
        ones(l.ln2_g);
        l.ln2_b = Tensor::zeros({d});
        l.w_mlp1 = Tensor::zeros({4 * d, d});
        xavier_uniform(l.w_mlp1, rng);
        l.b_mlp1 = Tensor::zeros({4 * d});
        l.w_mlp2 = Tensor::zeros({d, 4 * d});
        xavier_uniform(l.w_mlp2, rng);
        l.b_mlp2 = Tensor::zeros({d});
    }
    s.lnf_g = Tensor::zeros({d});
    ones(s.lnf_g);
    s.lnf_b = Tensor::zeros({d});
    s.w_head = Tensor::zeros({kVocabSize, d});
    xavier_uniform(s.w_head, rng);
    return s;
}

std::uint64_t lm_param_hash(const LmState& state) { return params_hash(state.parameters()); }

namespace {

Tensor causal_mask(int t) {
    Tensor mask = Tensor::zeros({t, t});
    auto data = mask.mutable_data();
    for (int i = 0; i < t; ++i) {
        for (int j = i + 1; j < t; ++j) {
            data[static_cast<std::size_t>(i) * t + j] = -1e30;
        }
    }
    return mask;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return num::add(num::matmul(x, num::transpose(w)), b);
}

}  // namespace

Tensor lm_logits(const LmState& state, const std::vector<int>& tokens,
                 const std::vector<int>& slot_positions, const Tensor& slot_matrix,
                 int pos_offset) {
    const LmConfig& cfg = state.config;
    const int t = static_cast<int>(tokens.size());
    if (t < 1) throw std::invalid_argument("lm_logits: empty token sequence");
    if (pos_offset < 0 || t + pos_offset > cfg.context) {
        throw std::invalid_argument("lm_logits: sequence length " + std::to_string(t) +
                                    " (offset " + std::to_string(pos_offset) +
                                    ") exceeds context " + std::to_string(cfg.context));
    }
    for (int id : tokens) {
        if (id < 0 || id >= kVocabSize) throw std::invalid_argument("lm_logits: token out of vocab");
    }
    std::vector<int> pos_ids(static_cast<std::size_t>(t));
    std::iota(pos_ids.begin(), pos_ids.end(), pos_offset);

    Tensor x = num::add(num::gather_rows(state.tok_emb, tokens),
                        num::gather_rows(state.pos_emb, pos_ids));
    if (!slot_positions.empty()) {
        x = num::inject_rows(x, slot_positions, slot_matrix);
    }

    const int dh = cfg.d_lm / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor mask = causal_mask(t);

    for (const LmLayer& l : state.blocks) {
        Tensor a = num::layernorm_rows(x, l.ln1_g, l.ln1_b);
        Tensor q = linear(a, l.wq, l.bq);
        Tensor k = linear(a, l.wk, l.bk);
        Tensor v = linear(a, l.wv, l.bv);
        std::vector<Tensor> heads;
        heads.reserve(static_cast<std::size_t>(cfg.heads));
        for (int h = 0; h < cfg.heads; ++h) {
            Tensor qh = num::slice_cols(q, h * dh, (h + 1) * dh);
            Tensor kh = num::slice_cols(k, h * dh, (h + 1) * dh);
            Tensor vh = num::slice_cols(v, h * dh, (h + 1) * dh);
            Tensor scores =
                num::add(num::scale(num::matmul(qh, num::transpose(kh)), att_scale), mask);
            Tensor att = num::softmax_rows(scores);
            heads.push_back(num::matmul(att, vh));
        }
        Tensor ctx = cfg.heads == 1 ? heads[0] : num::concat_cols(heads);
        x = num::add(x, linear(ctx, l.wo, l.bo));
        Tensor m = num::layernorm_rows(x, l.ln2_g, l.ln2_b);
        Tensor h1 = num::gelu(linear(m, l.w_mlp1, l.b_mlp1));
        x = num::add(x, linear(h1, l.w_mlp2, l.b_mlp2));
    }
    x = num::layernorm_rows(x, state.lnf_g, state.lnf_b);
    return num::matmul(x, num::transpose(state.w_head));
}

Tensor forward_loss(const LmState& state, const PromptPlan& plan, const Tensor& slot_matrix) {
    if (!plan.has_target()) {
        throw std::invalid_argument("forward_loss: plan has an empty target span");
    }
    const int n_slots = static_cast<int>(plan.slots.size());
    if (n_slots > 0) {
        if (!slot_matrix.defined() || slot_matrix.rank() != 2 || slot_matrix.dim(0) != n_slots ||
            slot_matrix.dim(1) != state.config.d_lm) {
            throw std::invalid_argument("forward_loss: missing slot vector(s); need " +
                                        std::to_string(n_slots) + " rows of width " +
                                        std::to_string(state.config.d_lm));
        }
    }
    std::vector<int> slot_positions;
    slot_positions.reserve(plan.slots.size());
    for (const SlotRef& s : plan.slots) {
        const int expected = s.kind == SlotKind::His ? kHisSlot : kDiffSlot;
        if (plan.tokens[static_cast<std::size_t>(s.position)] != expected) {
            throw std::invalid_argument("forward_loss: slot position does not hold a SLOT token");
        }
        slot_positions.push_back(s.position);
    }
    Tensor logits = lm_logits(state, plan.tokens, slot_positions,
                              n_slots > 0 ? slot_matrix : Tensor());
    std::vector<int> positions;
    std::vector<int> targets;
    positions.reserve(static_cast<std::size_t>(plan.target_end - plan.target_begin));
    for (int p = plan.target_begin; p < plan.target_end; ++p) {
        positions.push_back(p - 1);  // row p-1 predicts token p
        targets.push_back(plan.tokens[static_cast<std::size_t>(p)]);
    }
    return num::cross_entropy_mean(logits, positions, targets);
}

namespace {

const char* kTemplateDefault =
    "[system]\n"
    "Write a review in the target user's voice.\n"
    "[guidance]\n"
    "Soft tokens mark the user's style and peer differences.\n"
    "[history_text]\n"
    "Review:{bos}{history_text}{eos}\n"
    "[history_tokens]\n"
    "{his_tokens}{diff_tokens}\n"
    "[input]\n"
    "Item: {item_title}\n"
    "About: {item_description}\n"
    "Title: {output_title}\n"
    "Rating: {rating} of 5\n"
    "{histories}Review:\n";

std::string format_rating(double rating) {
    if (rating == std::floor(rating)) {
        return std::to_string(static_cast<long long>(rating));
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", rating);
    return buf;
}

void emit_bytes(std::vector<int>& tokens, std::string_view text) {
    for (unsigned char c : text) tokens.push_back(static_cast<int>(c));
}

struct HistoryRender {
    const PromptTemplate* tpl = nullptr;
    const PromptFlags* flags = nullptr;
};

// Expands one history block; slot markers append SlotRefs as they land.
void emit_history(std::vector<int>& tokens, std::vector<SlotRef>& slots, const HistoryRender& hr,
                  const Review& review, int history_index) {
    const PromptFlags& flags = *hr.flags;
    auto emit_section = [&](const std::string& section) {
        std::size_t i = 0;
        while (i < section.size()) {
            if (section[i] == '{') {
                std::size_t close = section.find('}', i);
                std::string_view name =
                    close == std::string::npos
                        ? std::string_view()
                        : std::string_view(section).substr(i + 1, close - i - 1);
                if (name == "history_text") {
                    emit_bytes(tokens, review.text);
                    i = close + 1;
                    continue;
                }
                if (name == "bos") {
                    tokens.push_back(kBos);
                    i = close + 1;
                    continue;
                }
                if (name == "eos") {
                    tokens.push_back(kEos);
                    i = close + 1;
                    continue;
                }
                if (name == "his_tokens") {
                    if (flags.use_his) {
                        tokens.push_back(kHisStart);
                        for (int r = 0; r < flags.soft_tokens_per_slot; ++r) {
                            slots.push_back(
                                SlotRef{static_cast<int>(tokens.size()), SlotKind::His, history_index});
                            tokens.push_back(kHisSlot);
                        }
                        tokens.push_back(kHisEnd);
                    }
                    i = close + 1;
                    continue;
                }
                if (name == "diff_tokens") {
                    if (flags.use_diff) {
                        tokens.push_back(kDiffStart);
                        for (int r = 0; r < flags.soft_tokens_per_slot; ++r) {
                            slots.push_back(SlotRef{static_cast<int>(tokens.size()), SlotKind::Diff,
                                                    history_index});
                            tokens.push_back(kDiffSlot);
                        }
                        tokens.push_back(kDiffEnd);
                    }
                    i = close + 1;
                    continue;
                }
            }
            tokens.push_back(static_cast<unsigned char>(section[i]));
            ++i;
        }
        tokens.push_back('\n');
    };
    if (flags.use_text && !hr.tpl->history_text.empty()) emit_section(hr.tpl->history_text);
    if ((flags.use_his || flags.use_diff) && !hr.tpl->history_tokens.empty()) {
        emit_section(hr.tpl->history_tokens);
    }
}

}  // namespace

PromptTemplate parse_prompt_template(const std::string& text) {
    PromptTemplate tpl;
    std::string* current = nullptr;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '[' && line.back() == ']') {
            std::string name = line.substr(1, line.size() - 2);
            if (name == "system") current = &tpl.system;
            else if (name == "guidance") current = &tpl.guidance;
            else if (name == "history_text") current = &tpl.history_text;
            else if (name == "history_tokens") current = &tpl.history_tokens;
            else if (name == "input") current = &tpl.input;
            else throw std::invalid_argument("prompt template: unknown section [" + name + "]");
            continue;
        }
        if (current == nullptr) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw std::invalid_argument("prompt template: content before first section header");
        }
        if (!current->empty()) current->push_back('\n');
        current->append(line);
    }
    if (tpl.input.empty()) throw std::invalid_argument("prompt template: missing [input] section");
    return tpl;
}

PromptTemplate load_prompt_template(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("prompt template: cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_prompt_template(buf.str());
}

const std::string& default_prompt_template_text() {
    static const std::string text = kTemplateDefault;
    return text;
}

PromptPlan assemble_prompt(const PromptTemplate& tpl, const LmConfig& config, const Item& item,
                           const std::string& output_title, double rating,
                           const RetrievedHistory& histories, const PromptFlags& flags,
                           const std::optional<std::string>& target_text, int reserve_tokens) {
    config.validate();
    if (flags.soft_tokens_per_slot < 1) {
        throw std::invalid_argument("assemble_prompt: soft_tokens_per_slot must be >= 1");
    }
    if (target_text && target_text->empty()) {
        throw std::invalid_argument("assemble_prompt: target review text empty at training time");
    }
    const int budget = config.context - (target_text ? 0 : std::max(0, reserve_tokens));
    if (budget < 8) throw std::invalid_argument("assemble_prompt: reserve leaves no room");

    HistoryRender hr{&tpl, &flags};

    auto build = [&](int kept) {
        PromptPlan plan;
        plan.kept_histories = kept;
        auto& tokens = plan.tokens;
        auto emit_plain_section = [&](const std::string& section) {
            if (section.empty()) return;
            emit_bytes(tokens, section);
            tokens.push_back('\n');
        };
        emit_plain_section(tpl.system);
        if (flags.guidance) emit_plain_section(tpl.guidance);

        const std::string& input = tpl.input;
        std::size_t i = 0;
        while (i < input.size()) {
            if (input[i] == '{') {
                std::size_t close = input.find('}', i);
                std::string_view name = close == std::string::npos
                                            ? std::string_view()
                                            : std::string_view(input).substr(i + 1, close - i - 1);
                if (name == "item_title") {
                    emit_bytes(tokens, item.title);
                    i = close + 1;
                    continue;
                }
                if (name == "item_description") {
                    emit_bytes(tokens, item.description);
                    i = close + 1;
                    continue;
                }
                if (name == "output_title") {
                    emit_bytes(tokens, output_title);
                    i = close + 1;
                    continue;
                }
                if (name == "rating") {
                    emit_bytes(tokens, format_rating(rating));
                    i = close + 1;
                    continue;
                }
                if (name == "histories") {
                    for (int h = 0; h < kept; ++h) {
                        emit_history(tokens, plan.slots, hr,
                                     histories[static_cast<std::size_t>(h)], h);
                    }
                    i = close + 1;
                    continue;
                }
            }
            tokens.push_back(static_cast<unsigned char>(input[i]));
            ++i;
        }
        tokens.push_back(kBos);
        if (target_text) {
            plan.target_begin = static_cast<int>(tokens.size());
            emit_bytes(tokens, *target_text);
            tokens.push_back(kEos);
            plan.target_end = static_cast<int>(tokens.size());
        }
        return plan;
    };

    int kept = static_cast<int>(histories.size());
    PromptPlan plan = build(kept);
    while (static_cast<int>(plan.tokens.size()) > budget && kept > 0) {
        --kept;  // whole trailing histories only, never partial
        plan = build(kept);
    }
    if (static_cast<int>(plan.tokens.size()) > budget) {
        if (!target_text) {
            throw std::runtime_error("assemble_prompt: prompt exceeds context with no histories");
        }
        // Truncate the supervised bytes, keeping EOS.
        const int prompt_len = plan.target_begin;
        const int room = budget - prompt_len - 1;
        if (room < 1) {
            throw std::runtime_error("assemble_prompt: no room for any supervised byte");
        }
        plan.tokens.resize(static_cast<std::size_t>(prompt_len + room));
        plan.tokens.push_back(kEos);
        plan.target_end = static_cast<int>(plan.tokens.size());
    }
    return plan;
}

std::vector<double> sample_distribution(const std::vector<double>& logits_row, double top_p,
                                        double temperature) {
    const std::size_t v = logits_row.size();
    std::vector<double> probs(v);
    double mx = logits_row[0];
    for (double x : logits_row) mx = std::max(mx, x);
    double z = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        probs[i] = std::exp(logits_row[i] - mx);
        z += probs[i];
    }
    for (double& p : probs) p /= z;

    if (top_p >= 1.0 && temperature == 1.0) return probs;  // plain ancestral

    std::vector<std::size_t> order(v);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&probs](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    std::vector<bool> kept(v, false);
    double cum = 0.0;
    for (std::size_t idx : order) {
        kept[idx] = true;
        cum += probs[idx];
        if (cum >= top_p) break;
    }
    // Temperature over the kept probabilities: p^(1/T), renormalized.
    std::vector<double> out(v, 0.0);
    const double inv_t = 1.0 / std::max(temperature, 1e-9);
    double mx_log = -1e300;
    for (std::size_t i = 0; i < v; ++i) {
        if (kept[i]) mx_log = std::max(mx_log, std::log(probs[i]) * inv_t);
    }
    double z2 = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        if (!kept[i]) continue;
        out[i] = std::exp(std::log(probs[i]) * inv_t - mx_log);
        z2 += out[i];
    }
    for (double& p : out) p /= z2;
    return out;
}

std::string decode_bytes(const std::vector<int>& tokens) {
    std::string bytes;
    bytes.reserve(tokens.size());
    for (int t : tokens) {
        if (t >= 0 && t < 256) bytes.push_back(static_cast<char>(t));
    }
    // Replace invalid UTF-8 sequences with U+FFFD.
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const auto bad = [&out]() { out += "\xEF\xBF\xBD"; };
    while (i < bytes.size()) {
        const unsigned char c = static_cast<unsigned char>(bytes[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        }
        int need = 0;
        if ((c & 0xE0) == 0xC0 && c >= 0xC2) need = 1;
        else if ((c & 0xF0) == 0xE0) need = 2;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4) need = 3;
        else {
            bad();
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(need) >= bytes.size()) {
            bad();
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k <= need; ++k) {
            if ((static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]) & 0xC0) != 0x80) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            bad();
            ++i;
            continue;
        }
        out.append(bytes, i, static_cast<std::size_t>(need) + 1);
        i += static_cast<std::size_t>(need) + 1;
    }
    return out;
}

std::string generate(const LmState& state, const PromptPlan& plan, const Tensor& slot_matrix,
                     const SampleOptions& options) {
    if (plan.has_target()) {
        throw std::invalid_argument("generate: plan must be inference-form (no target span)");
    }
    std::vector<int> slot_positions;
    for (const SlotRef& s : plan.slots) slot_positions.push_back(s.position);

    std::vector<int> tokens = plan.tokens;
    std::vector<int> produced;
    Rng rng(derive_seed(options.seed, "sample"));
    for (int step = 0; step < options.max_new; ++step) {
        if (static_cast<int>(tokens.size()) >= state.config.context) break;
        Tensor logits = lm_logits(state, tokens, slot_positions,
                                  plan.slots.empty() ? Tensor() : slot_matrix);
        const int t = static_cast<int>(tokens.size());
        std::vector<double> row(static_cast<std::size_t>(kVocabSize));
        for (int j = 0; j < kVocabSize; ++j) row[static_cast<std::size_t>(j)] = logits.at(t - 1, j);

        int next = 0;
        if (options.greedy || options.temperature <= 0.0) {
            next = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        } else {
            std::vector<double> dist = sample_distribution(row, options.top_p, options.temperature);
            const double u = rng.next_double();
            double cum = 0.0;
            next = kVocabSize - 1;
            for (int j = 0; j < kVocabSize; ++j) {
                cum += dist[static_cast<std::size_t>(j)];
                if (u < cum) {
                    next = j;
                    break;
                }
            }
        }
        if (next == kEos) break;
        tokens.push_back(next);
        produced.push_back(next);
    }
    return decode_bytes(produced);
}

namespace {

// Every review rendered as a training-form plan over its user's recent
// sibling reviews; the whole sequence is next-byte supervised. Layouts are
// mixed per plan (history count, text lines, slot groups, guidance) so
// each retrieval configuration the experiments use is in-distribution.
// Boundary and slot tokens are rendered as ordinary (trainable) tokens; no
// soft vectors are ever injected here.
std::vector<PromptPlan> pretrain_plans(const Corpus& corpus, const LmConfig& config,
                                       const PromptTemplate& tpl, int k,
                                       std::uint64_t seed = 11) {
    const std::uint64_t layout_seed = derive_seed(seed, "plan-layout");
    std::vector<PromptPlan> plans;
    std::uint64_t index = 0;
    for (const std::string& user : corpus.user_ids()) {
        const std::vector<int>& idx = corpus.user_reviews(user);
        for (auto it = idx.rbegin(); it != idx.rend(); ++it, ++index) {
            const Review& r = corpus.reviews()[static_cast<std::size_t>(*it)];
            const Item* item = corpus.find_item(r.item_id);
            const std::uint64_t h = splitmix64(layout_seed ^ index);
            // Concentrate capacity on the primary layout (text + both slot
            // groups); vary only the history count, plus a small share of
            // bare item blocks so the zero-history prompt stays
            // in-distribution too.
            PromptFlags flags;
            int k_eff = 0;
            if (h % 10 != 0 && k > 0) {  // 90%
                flags.use_text = flags.use_his = flags.use_diff = true;
                const int r = static_cast<int>((h >> 40) % 10);
                k_eff = r < 1 ? 1 : (r < 4 ? std::min(2, k) : k);
            } else {  // 10%: no histories at all
                flags.use_text = flags.use_his = flags.use_diff = false;
            }
            flags.guidance = true;
            RetrievedHistory hist = corpus.retrieve_recent(user, r.item_id, k_eff);
            plans.push_back(assemble_prompt(tpl, config, *item, r.title, r.rating, hist, flags,
                                            r.text));
        }
    }
    return plans;
}

double plan_loss(const LmState& state, const PromptPlan& plan, bool with_grad) {
    const int t = static_cast<int>(plan.tokens.size());
    std::vector<int> positions(static_cast<std::size_t>(t) - 1);
    std::vector<int> targets(static_cast<std::size_t>(t) - 1);
    for (int p = 1; p < t; ++p) {
        positions[static_cast<std::size_t>(p) - 1] = p - 1;
        targets[static_cast<std::size_t>(p) - 1] = plan.tokens[static_cast<std::size_t>(p)];
    }
    Tensor logits = lm_logits(state, plan.tokens, {}, Tensor());
    Tensor loss = num::cross_entropy_mean(logits, positions, targets);
    if (with_grad) {
        active_graph()->backward(loss);
    }
    return loss.item();
}

}  // namespace

LmState pretrain_frozen(const Corpus& corpus, const LmConfig& config, const PromptTemplate& tpl,
                        const PretrainOptions& options) {
    if (options.steps < 0) throw std::invalid_argument("pretrain_frozen: steps must be >= 0");
    LmState state = make_lm(config);
    if (options.steps == 0) return state;

    std::vector<PromptPlan> plans = pretrain_plans(corpus, config, tpl, options.k, options.seed);
    if (plans.empty()) throw std::invalid_argument("pretrain_frozen: empty corpus");

    state.set_trainable(true);
    AdamWOptions opt;
    opt.lr = options.lr;
    opt.warmup_steps = options.warmup_steps;
    opt.decay_steps = options.steps;
    opt.weight_decay = 0.0;
    AdamW optimizer(state.parameters(), opt);
    Rng rng(derive_seed(options.seed, "pretrain"));

    // Shuffled passes over the plan set rather than iid draws, so every
    // sequence is visited evenly.
    std::vector<std::size_t> order(plans.size());
    std::size_t cursor = order.size();
    for (int step = 0; step < options.steps; ++step) {
        if (cursor == order.size()) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) {
                std::size_t j = static_cast<std::size_t>(rng.next_below(i));
                std::swap(order[i - 1], order[j]);
            }
            cursor = 0;
        }
        GradGraph graph;
        GraphScope scope(graph);
        plan_loss(state, plans[order[cursor++]], true);
        optimizer.step();
    }
    state.set_trainable(false);
    return state;
}

double lm_heldout_loss(const LmState& state, const Corpus& corpus, const PromptTemplate& tpl,
                       int count, int k) {
    std::vector<PromptPlan> plans = pretrain_plans(corpus, state.config, tpl, k);
    if (plans.empty()) throw std::invalid_argument("lm_heldout_loss: empty corpus");
    const std::size_t n = std::min<std::size_t>(plans.size(), static_cast<std::size_t>(count));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += plan_loss(state, plans[i], false);
    return total / static_cast<double>(n);
}

}  // namespace dep
