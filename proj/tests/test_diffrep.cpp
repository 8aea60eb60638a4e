#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dep/diffrep.hpp"
#include "dep/hash.hpp"

using namespace dep;

TEST_SUITE("diffrep") {

TEST_CASE("user_specific matches the embedder bitwise") {
    EmbedderSpec spec;
    Review r;
    r.text = "zesty marmalade! superb five of five. zesty marmalade.";
    CHECK(user_specific(spec, r) == embed_text(spec, r.text));
    Review empty;
    std::vector<double> e = user_specific(spec, empty);
    for (double v : e) CHECK(v == 0.0);
}

TEST_CASE("difference: self-peer gives the zero vector") {
    std::vector<double> e{0.5, -0.25, 1.0};
    std::vector<double> d = difference(e, {e});
    for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("difference on the 2-dim toy example") {
    std::vector<double> e{1.0, 0.0};
    std::vector<double> d = difference(e, {{0.0, 1.0}, {1.0, 1.0}});
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("difference equals e - mean(peers) on random inputs") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 32;
        std::vector<double> e(dim);
        for (double& v : e) v = rng.next_uniform(-2, 2);
        std::vector<std::vector<double>> peers(10, std::vector<double>(dim));
        for (auto& p : peers) {
            for (double& v : p) v = rng.next_uniform(-2, 2);
        }
        std::vector<double> got = difference(e, peers);
        // Algebraic-identity oracle: e - mean(peers).
        for (std::size_t i = 0; i < dim; ++i) {
            double mean = 0.0;
            for (const auto& p : peers) mean += p[i];
            mean /= static_cast<double>(peers.size());
            CHECK(std::abs(got[i] - (e[i] - mean)) < 1e-12);
        }
    }
}

TEST_CASE("empty peer list gives the zero vector") {
    std::vector<double> e{1.0, 2.0, 3.0};
    for (double v : difference(e, {})) CHECK(v == 0.0);
}

TEST_CASE("length mismatch throws") {
    CHECK_THROWS_AS(difference({1.0, 2.0}, {{1.0}}), std::invalid_argument);
}

TEST_CASE("linearity: difference(e, P) + mean(P) = e") {
    Rng rng(23);
    std::vector<double> e(16);
    for (double& v : e) v = rng.next_uniform(-1, 1);
    std::vector<std::vector<double>> peers(7, std::vector<double>(16));
    for (auto& p : peers) {
        for (double& v : p) v = rng.next_uniform(-1, 1);
    }
    std::vector<double> d = difference(e, peers);
    for (std::size_t i = 0; i < e.size(); ++i) {
        double mean = 0.0;
        for (const auto& p : peers) mean += p[i];
        mean /= static_cast<double>(peers.size());
        CHECK(std::abs(d[i] + mean - e[i]) < 1e-12);
    }
}

TEST_CASE("peer order never changes the difference") {
    Rng rng(29);
    std::vector<double> e(8);
    for (double& v : e) v = rng.next_uniform(-1, 1);
    std::vector<std::vector<double>> peers(5, std::vector<double>(8));
    for (auto& p : peers) {
        for (double& v : p) v = rng.next_uniform(-1, 1);
    }
    std::vector<double> d1 = difference(e, peers);
    std::vector<std::vector<double>> shuffled{peers[3], peers[0], peers[4], peers[2], peers[1]};
    std::vector<double> d2 = difference(e, shuffled);
    for (std::size_t i = 0; i < d1.size(); ++i) CHECK(std::abs(d1[i] - d2[i]) < 1e-12);
}

TEST_CASE("scaling: difference(c*e, c*P) = c*difference(e, P)") {
    Rng rng(31);
    const double c = -2.5;
    std::vector<double> e(8), ce(8);
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = rng.next_uniform(-1, 1);
        ce[i] = c * e[i];
    }
    std::vector<std::vector<double>> peers(4, std::vector<double>(8)), cpeers(4, std::vector<double>(8));
    for (std::size_t p = 0; p < peers.size(); ++p) {
        for (std::size_t i = 0; i < 8; ++i) {
            peers[p][i] = rng.next_uniform(-1, 1);
            cpeers[p][i] = c * peers[p][i];
        }
    }
    std::vector<double> d = difference(e, peers);
    std::vector<double> cd = difference(ce, cpeers);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(cd[i] - c * d[i]) < 1e-12);
}

TEST_CASE("build_all: K = 0 and no-peer cases") {
    SynthConfig cfg;
    cfg.users = 4;
    cfg.items = 6;
    cfg.reviews_per_user = 3;
    cfg.seed = 2;
    Corpus corpus = generate_synthetic(cfg);
    EmbedderSpec spec;
    DiffRepOptions opts;
    opts.k = 0;
    CHECK(build_all(corpus, spec, corpus.user_ids()[0], "i0000", opts).empty());
}

TEST_CASE("build_all matches hand-composed embedder arithmetic on the 50-user corpus") {
    SynthConfig cfg;
    cfg.users = 50;
    cfg.items = 40;
    cfg.reviews_per_user = 6;
    cfg.seed = 7;
    Corpus corpus = generate_synthetic(cfg);
    EmbedderSpec spec;
    DiffRepOptions opts;
    opts.k = 4;
    opts.m_max = 16;

    // Check a handful of users end to end against an independent
    // recomputation of the embed / peer-mean pipeline.
    for (const std::string& user : {corpus.user_ids()[0], corpus.user_ids()[13],
                                    corpus.user_ids()[49]}) {
        const Review& target = corpus.reviews()[static_cast<std::size_t>(corpus.user_reviews(user)[0])];
        std::vector<DiffRepresentation> reps =
            build_all(corpus, spec, user, target.item_id, opts);
        RetrievedHistory hist = corpus.retrieve_recent(user, target.item_id, opts.k);
        REQUIRE(reps.size() == hist.size());
        for (std::size_t i = 0; i < reps.size(); ++i) {
            std::vector<double> e_his = embed_text(spec, hist[i].text);
            CHECK(reps[i].e_his == e_his);
            std::vector<Review> peer_reviews = corpus.peers(hist[i].item_id, user, opts.m_max);
            CHECK(reps[i].peer_count == static_cast<int>(peer_reviews.size()));
            for (std::size_t j = 0; j < e_his.size(); ++j) {
                double acc = 0.0;
                for (const Review& p : peer_reviews) {
                    acc += e_his[j] - embed_text(spec, p.text)[j];
                }
                const double expected =
                    peer_reviews.empty() ? 0.0 : acc / static_cast<double>(peer_reviews.size());
                CHECK(std::abs(reps[i].e_diff[j] - expected) < 1e-12);
            }
            if (reps[i].peer_count == 0) {
                for (double v : reps[i].e_diff) CHECK(v == 0.0);
            }
        }
    }
}

TEST_CASE("diffrep cache file round-trips") {
    DiffRepFile file;
    file.corpus_hash = 0xabcdef;
    file.embedder_hash = 0x123456;
    file.dim = 4;
    DiffRepresentation rep;
    rep.e_his = {0.25, -0.5, 1.0, 0.125};
    rep.e_diff = {0.0, 0.5, -0.25, 2.0};
    rep.item_id = "item-9";
    rep.peer_count = 3;
    file.instances.push_back({rep});
    file.instances.push_back({});
    const std::string path = "/tmp/dep_t_diffrep.bin";
    save_diffrep_file(file, path);
    DiffRepFile back = load_diffrep_file(path);
    CHECK(back.corpus_hash == file.corpus_hash);
    CHECK(back.embedder_hash == file.embedder_hash);
    REQUIRE(back.instances.size() == 2);
    REQUIRE(back.instances[0].size() == 1);
    CHECK(back.instances[0][0].item_id == "item-9");
    CHECK(back.instances[0][0].peer_count == 3);
    CHECK(back.instances[0][0].e_his == rep.e_his);  // exact: values are f32-representable
    CHECK(back.instances[1].empty());
    std::remove(path.c_str());
}

}  // TEST_SUITE
