#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "dep/embedder.hpp"

using namespace dep;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

double norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("embedder") {

TEST_CASE("empty and whitespace-only input give the zero vector") {
    EmbedderSpec spec;
    for (const char* text : {"", "   ", " \t\n", "ab"}) {  // "ab" is below ngram_min
        std::vector<double> e = embed_text(spec, text);
        CHECK(e.size() == 1024);
        for (double v : e) CHECK(v == 0.0);
    }
}

TEST_CASE("same (spec, text) is bitwise deterministic") {
    EmbedderSpec spec;
    for (const char* text : {"great book, loved it", "x y z", "ZeStY MarMalade!"}) {
        std::vector<double> a = embed_text(spec, text);
        std::vector<double> b = embed_text(spec, text);
        CHECK(a == b);
    }
}

TEST_CASE("unit norm for any text with at least one n-gram") {
    EmbedderSpec spec;
    for (const char* text : {"abc", "a slightly longer sentence with punctuation!", "12345"}) {
        CHECK(std::abs(norm(embed_text(spec, text)) - 1.0) < 1e-9);
    }
}

TEST_CASE("lowercasing is built in") {
    EmbedderSpec spec;
    CHECK(embed_text(spec, "Great Book") == embed_text(spec, "great book"));
}

TEST_CASE("near-duplicate text is closer than unrelated text") {
    EmbedderSpec spec;
    std::vector<double> a = embed_text(spec, "great book, loved it");
    std::vector<double> far = embed_text(spec, "terrible, boring prose");
    std::vector<double> near = embed_text(spec, "great book loved it!");
    CHECK(cosine(a, far) < cosine(a, near));
}

TEST_CASE("embedding a text is independent of any other computed text") {
    // Purity: permuting unrelated corpus entries never changes a vector.
    EmbedderSpec spec;
    std::vector<std::string> corpus = {"one fish", "two fish", "red fish", "blue fish"};
    std::vector<double> direct = embed_text(spec, corpus[2]);
    EmbedCache forward_order(spec), reverse_order(spec);
    for (const std::string& t : corpus) forward_order.get(t);
    for (auto it = corpus.rbegin(); it != corpus.rend(); ++it) reverse_order.get(*it);
    CHECK(forward_order.get(corpus[2]) == direct);
    CHECK(reverse_order.get(corpus[2]) == direct);
}

TEST_CASE("different seeds give different projections") {
    EmbedderSpec a, b;
    b.seed = a.seed + 1;
    CHECK(embed_text(a, "some text here") != embed_text(b, "some text here"));
}

TEST_CASE("cache file round-trips and rejects a mismatched spec") {
    EmbedderSpec spec;
    EmbedCache cache(spec);
    cache.get("alpha beta gamma");
    cache.get("delta epsilon");
    const std::string path = "/tmp/dep_test_embed_cache.txt";
    cache.save(path);

    EmbedCache loaded(spec);
    CHECK(loaded.load(path));
    CHECK(loaded.size() == 2);
    // Entries round-trip through f32.
    std::vector<double> fresh = embed_text(spec, "alpha beta gamma");
    const std::vector<double>& cached = loaded.get("alpha beta gamma");
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        CHECK(std::abs(fresh[i] - cached[i]) < 1e-6);
    }

    EmbedderSpec other = spec;
    other.seed = spec.seed + 5;
    EmbedCache wrong(other);
    CHECK_FALSE(wrong.load(path));
    std::remove(path.c_str());
}

}  // TEST_SUITE
