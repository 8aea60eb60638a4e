#pragma once

// Self-contained text metrics on one shared tokenization (ASCII-lowercase,
// maximal alphanumeric runs): ROUGE-1, corpus BLEU with floor smoothing,
// and an exact-match METEOR variant. Plus the user-uniqueness split. All
// pure functions.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dep/corpus.hpp"
#include "dep/embedder.hpp"

namespace dep {

std::vector<std::string> metric_tokenize(std::string_view text);

struct Rouge1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Clipped unigram overlap; empty side scores all zeros.
Rouge1 rouge1(std::string_view candidate, std::string_view reference);

// Corpus BLEU on a 0-100 scale: modified n-gram precisions n = 1..4 with
// zero numerators floored at 1e-9, geometric mean over orders that have
// any candidate n-gram, brevity penalty exp(1 - |ref|/|cand|) when the
// candidate corpus is shorter.
double bleu(const std::vector<std::string>& candidates,
            const std::vector<std::string>& references);

// Greedy left-to-right exact unigram alignment; F = 10PR/(R+9P), chunk
// penalty 0.5*(chunks/m)^3; zero when nothing matches.
double meteor_lite(std::string_view candidate, std::string_view reference);

struct MetricReport {
    Rouge1 rouge;
    double bleu_score = 0.0;   // 0..100
    double meteor = 0.0;       // 0..1, mean over instances
    std::size_t count = 0;
};

// Per-corpus aggregation: rouge1/meteor averaged per instance, BLEU at the
// corpus level.
MetricReport score_all(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references);

struct UniquenessSplit {
    std::set<std::string> unique_users;
    std::set<std::string> non_unique_users;
};

// Users sorted by Euclidean distance between their mean review embedding
// and the global mean over users, descending; top half (rounded up) is
// unique; ties break by user_id ascending.
UniquenessSplit uniqueness_split(const Corpus& corpus, const EmbedderSpec& spec);

}  // namespace dep
