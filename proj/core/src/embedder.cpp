#include "dep/embedder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dep/hash.hpp"

namespace dep {

namespace {

constexpr std::uint64_t kProjectionTag = 0x70726f6a;  // "proj"

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

const char* kBase64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<float>& v) {
    std::string bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        unsigned a = static_cast<unsigned char>(bytes[i]), b = static_cast<unsigned char>(bytes[i + 1]),
                 c = static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kBase64[a >> 2]);
        out.push_back(kBase64[((a & 3) << 4) | (b >> 4)]);
        out.push_back(kBase64[((b & 15) << 2) | (c >> 6)]);
        out.push_back(kBase64[c & 63]);
        i += 3;
    }
    if (i < bytes.size()) {
        unsigned a = static_cast<unsigned char>(bytes[i]);
        unsigned b = (i + 1 < bytes.size()) ? static_cast<unsigned char>(bytes[i + 1]) : 0;
        out.push_back(kBase64[a >> 2]);
        out.push_back(kBase64[((a & 3) << 4) | (b >> 4)]);
        out.push_back((i + 1 < bytes.size()) ? kBase64[(b & 15) << 2] : '=');
        out.push_back('=');
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::vector<float> base64_decode(std::string_view s) {
    std::string bytes;
    bytes.reserve(s.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (char c : s) {
        if (c == '=') break;
        int v = b64_value(c);
        if (v < 0) throw std::runtime_error("embed cache: bad base64");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            bytes.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    if (bytes.size() % sizeof(float) != 0) throw std::runtime_error("embed cache: bad length");
    std::vector<float> out(bytes.size() / sizeof(float));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace

std::uint64_t EmbedderSpec::content_hash() const {
    HashAccumulator h;
    h.update("embedder-spec-v1");
    h.update_u64(static_cast<std::uint64_t>(dim));
    h.update_u64(static_cast<std::uint64_t>(ngram_min));
    h.update_u64(static_cast<std::uint64_t>(ngram_max));
    h.update_u64(static_cast<std::uint64_t>(num_buckets));
    h.update_u64(seed);
    return h.digest();
}

std::vector<double> embed_text(const EmbedderSpec& spec, std::string_view text) {
    if (spec.dim <= 0 || spec.ngram_min < 1 || spec.ngram_max < spec.ngram_min ||
        spec.num_buckets < 1) {
        throw std::invalid_argument("embed_text: bad embedder spec");
    }
    std::vector<double> out(static_cast<std::size_t>(spec.dim), 0.0);

    bool all_whitespace = true;
    for (char c : text) {
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f') {
            all_whitespace = false;
            break;
        }
    }
    if (all_whitespace) return out;

    std::string lower(text);
    for (char& c : lower) c = ascii_lower(c);

    // Signed hashed n-gram counts, sparse.
    std::unordered_map<std::uint64_t, double> features;
    const std::size_t len = lower.size();
    for (int n = spec.ngram_min; n <= spec.ngram_max; ++n) {
        if (len < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= len; ++i) {
            std::uint64_t h =
                splitmix64(fnv1a64(std::string_view(lower.data() + i, static_cast<std::size_t>(n))) ^
                           spec.seed);
            std::uint64_t bucket = h % static_cast<std::uint64_t>(spec.num_buckets);
            features[bucket] += (h >> 63) ? -1.0 : 1.0;
        }
    }
    if (features.empty()) return out;  // zero vector, not normalized

    const std::uint64_t proj_seed = splitmix64(spec.seed ^ kProjectionTag);
    const int slots = spec.dim / 64 > 0 ? spec.dim / 64 : 1;
    for (const auto& [bucket, count] : features) {
        if (count == 0.0) continue;
        for (int s = 0; s < slots; ++s) {
            std::uint64_t p =
                splitmix64(proj_seed ^ (bucket * static_cast<std::uint64_t>(slots) +
                                        static_cast<std::uint64_t>(s)));
            std::size_t pos = static_cast<std::size_t>(p % static_cast<std::uint64_t>(spec.dim));
            out[pos] += (p >> 63) ? -count : count;
        }
    }

    double norm_sq = 0.0;
    for (double v : out) norm_sq += v * v;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : out) v *= inv;
    }
    return out;
}

const std::vector<double>& EmbedCache::get(std::string_view text) {
    const std::uint64_t key = fnv1a64(text);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        it = entries_.emplace(key, embed_text(spec_, text)).first;
    }
    return it->second;
}

void EmbedCache::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("embed cache: cannot write " + path);
    f << "DEPEMB 1 " << to_hex(spec_.content_hash()) << "\n";
    for (const auto& [key, vec] : entries_) {
        std::vector<float> v32(vec.begin(), vec.end());
        f << to_hex(key) << " " << base64_encode(v32) << "\n";
    }
}

bool EmbedCache::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    std::string magic, version, spec_hash;
    if (!(f >> magic >> version >> spec_hash)) return false;
    if (magic != "DEPEMB" || version != "1" || spec_hash != to_hex(spec_.content_hash())) {
        return false;
    }
    std::string key_hex, payload;
    while (f >> key_hex >> payload) {
        std::uint64_t key = std::stoull(key_hex, nullptr, 16);
        std::vector<float> v32 = base64_decode(payload);
        entries_[key] = std::vector<double>(v32.begin(), v32.end());
    }
    return true;
}

}  // namespace dep
