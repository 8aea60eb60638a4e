#pragma once

// User-specific and difference-aware embeddings per retrieved history:
// e_his embeds the user's own review; e_diff is the mean of (e_his -
// e_peer) over peers who reviewed the same item, the contrastive signal
// the rest of the stack consumes. Pure functions; safe to precompute
// instances in parallel.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dep/corpus.hpp"
#include "dep/embedder.hpp"

namespace dep {

struct DiffRepresentation {
    std::vector<double> e_his;   // dim d
    std::vector<double> e_diff;  // dim d; zero vector when peer_count == 0
    std::string item_id;
    int peer_count = 0;
};

// embed_text applied to the review text.
std::vector<double> user_specific(const EmbedderSpec& spec, const Review& review);

// (1/m) * sum_j (e_his - peer_j); the zero vector when peers is empty.
std::vector<double> difference(const std::vector<double>& e_his,
                               const std::vector<std::vector<double>>& peer_embeddings);

struct DiffRepOptions {
    int k = 8;
    int m_max = 16;
    // When true, only peer reviews older than the history review qualify.
    bool peers_before_target = false;
};

// One DiffRepresentation per retrieved history, in retrieve_recent order.
std::vector<DiffRepresentation> build_all(const Corpus& corpus, const EmbedderSpec& spec,
                                          const std::string& user_id,
                                          const std::string& target_item,
                                          const DiffRepOptions& options,
                                          EmbedCache* cache = nullptr);

// Versioned binary cache of precomputed representations, keyed by corpus
// hash and embedder spec: JSON manifest line, then little-endian f32
// payload (per instance: n, then n * [e_his, e_diff, peer_count]).
struct DiffRepFile {
    std::uint64_t corpus_hash = 0;
    std::uint64_t embedder_hash = 0;
    int dim = 0;
    std::vector<std::vector<DiffRepresentation>> instances;
};

void save_diffrep_file(const DiffRepFile& file, const std::string& path);
DiffRepFile load_diffrep_file(const std::string& path);

}  // namespace dep
