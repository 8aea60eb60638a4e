#include "dep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace dep {

std::vector<std::string> metric_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c + 32);
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (alnum) {
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Rouge1 rouge1(std::string_view candidate, std::string_view reference) {
    const std::vector<std::string> cand = metric_tokenize(candidate);
    const std::vector<std::string> ref = metric_tokenize(reference);
    Rouge1 out;
    if (cand.empty() || ref.empty()) return out;
    std::unordered_map<std::string, int> ref_counts;
    for (const auto& t : ref) ++ref_counts[t];
    std::unordered_map<std::string, int> cand_counts;
    for (const auto& t : cand) ++cand_counts[t];
    double overlap = 0.0;
    for (const auto& [tok, n] : cand_counts) {
        auto it = ref_counts.find(tok);
        if (it != ref_counts.end()) overlap += std::min(n, it->second);
    }
    out.precision = overlap / static_cast<double>(cand.size());
    out.recall = overlap / static_cast<double>(ref.size());
    if (out.precision > 0.0 && out.recall > 0.0) {
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
    NgramCounts out;
    if (static_cast<int>(tokens.size()) < n) return out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::vector<std::string> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) +
                                          static_cast<std::ptrdiff_t>(n));
        ++out[std::move(gram)];
    }
    return out;
}

}  // namespace

double bleu(const std::vector<std::string>& candidates,
            const std::vector<std::string>& references) {
    if (candidates.size() != references.size()) {
        throw std::invalid_argument("bleu: candidate/reference count mismatch");
    }
    if (candidates.empty()) throw std::invalid_argument("bleu: empty corpus");

    constexpr int kMaxOrder = 4;
    constexpr double kFloor = 1e-9;
    double matched[kMaxOrder] = {0, 0, 0, 0};
    double total[kMaxOrder] = {0, 0, 0, 0};
    double cand_len = 0.0, ref_len = 0.0;

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::vector<std::string> cand = metric_tokenize(candidates[i]);
        const std::vector<std::string> ref = metric_tokenize(references[i]);
        cand_len += static_cast<double>(cand.size());
        ref_len += static_cast<double>(ref.size());
        for (int n = 1; n <= kMaxOrder; ++n) {
            NgramCounts cg = ngram_counts(cand, n);
            if (cg.empty()) continue;
            NgramCounts rg = ngram_counts(ref, n);
            for (const auto& [gram, count] : cg) {
                total[n - 1] += count;
                auto it = rg.find(gram);
                if (it != rg.end()) matched[n - 1] += std::min(count, it->second);
            }
        }
    }

    // Geometric mean over orders that have candidate n-grams at all; zero
    // numerators are floored so one miss does not zero the score.
    double log_sum = 0.0;
    int orders = 0;
    for (int n = 0; n < kMaxOrder; ++n) {
        if (total[n] <= 0.0) continue;
        const double p = matched[n] > 0.0 ? matched[n] / total[n] : kFloor;
        log_sum += std::log(p);
        ++orders;
    }
    if (orders == 0 || cand_len == 0.0) return 0.0;
    const double geo = std::exp(log_sum / static_cast<double>(orders));
    const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
    return 100.0 * bp * geo;
}

double meteor_lite(std::string_view candidate, std::string_view reference) {
    const std::vector<std::string> cand = metric_tokenize(candidate);
    const std::vector<std::string> ref = metric_tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    // Greedy left-to-right: each candidate token takes the first unmatched
    // identical reference token.
    std::vector<int> match_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    int m = 0;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
        for (std::size_t ri = 0; ri < ref.size(); ++ri) {
            if (!ref_used[ri] && ref[ri] == cand[ci]) {
                ref_used[ri] = true;
                match_ref[ci] = static_cast<int>(ri);
                ++m;
                break;
            }
        }
    }
    if (m == 0) return 0.0;

    const double p = static_cast<double>(m) / static_cast<double>(cand.size());
    const double r = static_cast<double>(m) / static_cast<double>(ref.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);

    int chunks = 0;
    int prev_ci = -2, prev_ri = -2;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
        if (match_ref[ci] < 0) continue;
        if (static_cast<int>(ci) != prev_ci + 1 || match_ref[ci] != prev_ri + 1) ++chunks;
        prev_ci = static_cast<int>(ci);
        prev_ri = match_ref[ci];
    }
    const double frag = static_cast<double>(chunks) / static_cast<double>(m);
    const double penalty = 0.5 * frag * frag * frag;
    return f * (1.0 - penalty);
}

MetricReport score_all(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references) {
    if (candidates.size() != references.size()) {
        throw std::invalid_argument("score_all: candidate/reference count mismatch");
    }
    MetricReport report;
    report.count = candidates.size();
    if (candidates.empty()) return report;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Rouge1 r = rouge1(candidates[i], references[i]);
        report.rouge.precision += r.precision;
        report.rouge.recall += r.recall;
        report.rouge.f1 += r.f1;
        report.meteor += meteor_lite(candidates[i], references[i]);
    }
    const double inv = 1.0 / static_cast<double>(candidates.size());
    report.rouge.precision *= inv;
    report.rouge.recall *= inv;
    report.rouge.f1 *= inv;
    report.meteor *= inv;
    report.bleu_score = bleu(candidates, references);
    return report;
}

UniquenessSplit uniqueness_split(const Corpus& corpus, const EmbedderSpec& spec) {
    const std::vector<std::string>& users = corpus.user_ids();
    if (users.size() < 2) {
        throw std::invalid_argument("uniqueness_split: need at least 2 users");
    }
    const std::size_t dim = static_cast<std::size_t>(spec.dim);
    std::vector<std::vector<double>> user_means(users.size(), std::vector<double>(dim, 0.0));
    std::vector<double> global(dim, 0.0);
    for (std::size_t u = 0; u < users.size(); ++u) {
        const std::vector<int>& idx = corpus.user_reviews(users[u]);
        for (int i : idx) {
            std::vector<double> e = embed_text(spec, corpus.reviews()[static_cast<std::size_t>(i)].text);
            for (std::size_t j = 0; j < dim; ++j) user_means[u][j] += e[j];
        }
        const double inv = idx.empty() ? 0.0 : 1.0 / static_cast<double>(idx.size());
        for (std::size_t j = 0; j < dim; ++j) {
            user_means[u][j] *= inv;
            global[j] += user_means[u][j];
        }
    }
    for (double& v : global) v /= static_cast<double>(users.size());

    std::vector<std::pair<double, std::string>> ranked;
    ranked.reserve(users.size());
    for (std::size_t u = 0; u < users.size(); ++u) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = user_means[u][j] - global[j];
            d2 += d * d;
        }
        ranked.emplace_back(std::sqrt(d2), users[u]);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    UniquenessSplit out;
    const std::size_t unique_n = (users.size() + 1) / 2;  // odd counts favor unique
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        (i < unique_n ? out.unique_users : out.non_unique_users).insert(ranked[i].second);
    }
    return out;
}

}  // namespace dep
