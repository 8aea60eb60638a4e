#include <benchmark/benchmark.h>

#include "dep/corpus.hpp"
#include "dep/embedder.hpp"
#include "dep/hash.hpp"
#include "dep/sae.hpp"
#include "dep/tensor.hpp"
#include "dep/toylm.hpp"

namespace {

using namespace dep;

Tensor random_matrix(int r, int c, std::uint64_t seed, bool requires_grad = false) {
    Rng rng(seed);
    std::vector<double> data(static_cast<std::size_t>(r) * c);
    for (double& v : data) v = rng.next_uniform(-0.5, 0.5);
    return Tensor::from_data({r, c}, std::move(data), requires_grad);
}

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Tensor a = random_matrix(n, n, 1);
    Tensor b = random_matrix(n, n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(num::matmul(a, b).data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_embed_text(benchmark::State& state) {
    EmbedderSpec spec;
    const std::string text =
        "a medium-length review text with a handful of distinctive words, "
        "punctuation, and enough characters to exercise the n-gram loop.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(embed_text(spec, text).data());
    }
}
BENCHMARK(BM_embed_text);

void BM_sae_roundtrip(benchmark::State& state) {
    SaeState sae = make_sae(1024, 512, false);
    Rng rng(3);
    for (Tensor t : {sae.w_enc, sae.w_dec}) {
        auto d = t.mutable_data();
        for (double& v : d) v = rng.next_uniform(-0.05, 0.05);
    }
    Tensor e = random_matrix(8, 1024, 4);
    for (auto _ : state) {
        Tensor z = sae_encode(sae, e);
        benchmark::DoNotOptimize(sae_decode(sae, z).data().data());
    }
}
BENCHMARK(BM_sae_roundtrip);

void BM_lm_forward(benchmark::State& state) {
    LmConfig config;
    LmState lm = make_lm(config);
    const int t = static_cast<int>(state.range(0));
    Rng rng(5);
    std::vector<int> tokens(static_cast<std::size_t>(t));
    for (int& v : tokens) v = 'a' + static_cast<int>(rng.next_below(26));
    for (auto _ : state) {
        benchmark::DoNotOptimize(lm_logits(lm, tokens, {}, Tensor()).data().data());
    }
    state.SetItemsProcessed(state.iterations() * t);
}
BENCHMARK(BM_lm_forward)->Arg(128)->Arg(384);

void BM_lm_train_step(benchmark::State& state) {
    LmConfig config;
    LmState lm = make_lm(config);
    lm.set_trainable(true);
    Rng rng(6);
    const int t = 256;
    std::vector<int> tokens(static_cast<std::size_t>(t));
    for (int& v : tokens) v = 'a' + static_cast<int>(rng.next_below(26));
    std::vector<int> positions(static_cast<std::size_t>(t) - 1);
    std::vector<int> targets(static_cast<std::size_t>(t) - 1);
    for (int p = 1; p < t; ++p) {
        positions[static_cast<std::size_t>(p) - 1] = p - 1;
        targets[static_cast<std::size_t>(p) - 1] = tokens[static_cast<std::size_t>(p)];
    }
    for (auto _ : state) {
        GradGraph g;
        GraphScope scope(g);
        Tensor logits = lm_logits(lm, tokens, {}, Tensor());
        Tensor loss = num::cross_entropy_mean(logits, positions, targets);
        g.backward(loss);
        for (Tensor p : lm.parameters()) p.zero_grad();
        benchmark::DoNotOptimize(loss.item());
    }
    state.SetItemsProcessed(state.iterations() * t);
}
BENCHMARK(BM_lm_train_step);

}  // namespace

BENCHMARK_MAIN();
