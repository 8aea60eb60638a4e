#pragma once

// Frozen deterministic text embedder: hashed character n-grams with a
// seeded signed sparse random projection, L2-normalized. Stands in for an
// external embedding model; same (spec, text) always yields the same
// vector, bit for bit, on any platform.
//
// Pipeline, fixed exactly (see hash.hpp for the hash definitions):
//   1. ASCII-lowercase the UTF-8 bytes.
//   2. For every contiguous byte n-gram, n in [ngram_min, ngram_max]:
//        h      = splitmix64(fnv1a64(ngram) ^ seed)
//        bucket = h mod num_buckets
//        sign   = +1 if top bit of h clear, else -1
//      and accumulate sign into feature[bucket].
//   3. For every nonzero bucket b and slot s in [0, dim/64):
//        p    = splitmix64(splitmix64(seed ^ 0x70726f6a) ^ (b*(dim/64)+s))
//        pos  = p mod dim,  sign = +1/-1 from top bit of p
//      add sign * feature[b] into out[pos].
//   4. L2-normalize. Texts with no n-gram (empty, whitespace-only or
//      shorter than ngram_min) return the all-zero vector.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dep {

struct EmbedderSpec {
    int dim = 1024;
    int ngram_min = 3;
    int ngram_max = 5;
    int num_buckets = 1 << 18;
    std::uint64_t seed = 17;

    std::uint64_t content_hash() const;
};

std::vector<double> embed_text(const EmbedderSpec& spec, std::string_view text);

// Optional on-disk cache: versioned header, then one record per line
// "<text-hash-hex> <base64 f32 vector>". Lookups are exact on the text's
// FNV-1a hash; the header pins the spec so stale caches are rejected.
class EmbedCache {
  public:
    explicit EmbedCache(const EmbedderSpec& spec) : spec_(spec) {}

    const std::vector<double>& get(std::string_view text);
    std::size_t size() const { return entries_.size(); }

    void save(const std::string& path) const;
    // Returns false (and leaves the cache empty) if the file is missing or
    // was written under a different spec.
    bool load(const std::string& path);

  private:
    EmbedderSpec spec_;
    std::unordered_map<std::uint64_t, std::vector<double>> entries_;
};

}  // namespace dep
