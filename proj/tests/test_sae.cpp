#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dep/hash.hpp"
#include "dep/sae.hpp"
#include "oracles.hpp"

using namespace dep;
using dep::testing::finite_diff;
using dep::testing::grad_of;
using dep::testing::max_rel_err;

namespace {

// Small dims keep the finite-difference sweeps fast; the shapes are
// configurable in the state itself.
SaeState random_sae(int in, int latent, Rng& rng) {
    SaeState s = make_sae(in, latent, true);
    for (Tensor t : {s.w_enc, s.w_dec}) {
        auto d = t.mutable_data();
        for (double& v : d) v = rng.next_uniform(-0.4, 0.4);
    }
    for (Tensor t : {s.b_enc, s.b_dec}) {
        auto d = t.mutable_data();
        for (double& v : d) v = rng.next_uniform(-0.2, 0.2);
    }
    return s;
}

Tensor random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
    std::vector<double> data(static_cast<std::size_t>(r) * c);
    for (double& v : data) v = rng.next_uniform(-scale, scale);
    return Tensor::from_data({r, c}, std::move(data));
}

}  // namespace

TEST_SUITE("sae") {

TEST_CASE("zero weights and bias encode to 0.5 everywhere") {
    SaeState s = make_sae(1024, 512, false);
    Tensor e = Tensor::zeros({1, 1024});
    Tensor z = sae_encode(s, e);
    CHECK(z.dim(1) == 512);
    for (double v : z.data()) CHECK(v == 0.5);
}

TEST_CASE("encode output has latent width and stays strictly inside (0,1)") {
    Rng rng(3);
    SaeState s = random_sae(48, 24, rng);
    Tensor e = random_matrix(5, 48, rng, 40.0);  // large inputs still stay inside
    NoGradGuard no_grad;
    Tensor z = sae_encode(s, e);
    CHECK(z.dim(0) == 5);
    CHECK(z.dim(1) == 24);
    for (double v : z.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("decode: zero latent and zero bias give zero output, width restored") {
    SaeState s = make_sae(64, 16, false);
    Tensor z = Tensor::zeros({2, 16});
    Tensor e = sae_decode(s, z);
    CHECK(e.dim(1) == 64);
    for (double v : e.data()) CHECK(v == 0.0);
}

TEST_CASE("shape mismatches throw") {
    SaeState s = make_sae(64, 16, false);
    CHECK_THROWS_AS(sae_encode(s, Tensor::zeros({1, 32})), std::invalid_argument);
    CHECK_THROWS_AS(sae_decode(s, Tensor::zeros({1, 32})), std::invalid_argument);
}

TEST_CASE("encode/decode gradients match finite differences") {
    Rng rng(7);
    SaeState s = random_sae(20, 8, rng);
    Tensor e = random_matrix(3, 20, rng);
    Tensor weights = random_matrix(3, 20, rng);

    auto build = [&]() {
        Tensor z = sae_encode(s, e);
        Tensor e_hat = sae_decode(s, z);
        return num::sum(num::mul(e_hat, weights));
    };
    GradGraph g;
    {
        GraphScope scope(g);
        g.backward(build());
    }
    auto forward = [&]() {
        NoGradGuard no_grad;
        return build().item();
    };
    for (Tensor t : s.parameters()) {
        CHECK(max_rel_err(grad_of(t), finite_diff(t, forward)) < 1e-6);
    }
}

TEST_CASE("recon_loss worked values") {
    const int d = 1024;
    Tensor zeros = Tensor::zeros({1, d});

    SUBCASE("perfect reconstruction is zero") {
        Tensor loss = recon_loss(zeros, zeros, zeros, zeros);
        CHECK(loss.item() == 0.0);
    }
    SUBCASE("one coordinate off by 1.0 contributes 0.5/1024") {
        Tensor hat = Tensor::zeros({1, d});
        hat.mutable_data()[17] = 1.0;
        Tensor loss = recon_loss(zeros, hat, zeros, zeros);
        CHECK(loss.item() == doctest::Approx(0.5 / 1024).epsilon(1e-15));
    }
    SUBCASE("one coordinate off by 2.0 contributes 1.5/1024") {
        Tensor hat = Tensor::zeros({1, d});
        hat.mutable_data()[0] = 2.0;
        Tensor loss = recon_loss(zeros, hat, zeros, zeros);
        CHECK(loss.item() == doctest::Approx(1.5 / 1024).epsilon(1e-15));
    }
    SUBCASE("nonnegative, zero only at equality") {
        Rng rng(5);
        Tensor e = random_matrix(2, d, rng);
        Tensor hat = random_matrix(2, d, rng);
        CHECK(recon_loss(e, hat, e, e).item() > 0.0);
        CHECK(recon_loss(e, e, e, e).item() == 0.0);
    }
}

TEST_CASE("sparsity_loss worked values") {
    const int d_latent = 512;
    const double rho = 0.05;

    SUBCASE("rho_hat equal to rho gives zero") {
        Tensor z = Tensor::full({4, d_latent}, rho);
        CHECK(sparsity_loss(z, z, rho).item() == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("uniform rho_hat = 0.5 gives about 0.989264 over both streams") {
        Tensor z = Tensor::full({4, d_latent}, 0.5);
        // Closed-form Bernoulli KL evaluation.
        const double kl = rho * std::log(rho / 0.5) + (1 - rho) * std::log((1 - rho) / 0.5);
        const double expected = 2.0 * kl;
        CHECK(expected == doctest::Approx(0.989264).epsilon(1e-5));
        CHECK(sparsity_loss(z, z, rho).item() == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(sparsity_loss(z, z, rho).item() - 0.989264) < 1e-6);
    }
    SUBCASE("loss strictly increases as one unit's rho_hat rises from rho") {
        double prev = -1.0;
        for (double v : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0 - 2e-6}) {
            Tensor z = Tensor::full({1, d_latent}, rho);
            z.mutable_data()[3] = v;
            const double cur = sparsity_loss_single(z, rho).item();
            CHECK(cur > prev);
            prev = cur;
        }
    }
    SUBCASE("N = 0 is rejected, as is rho outside (0,1)") {
        CHECK_THROWS_AS(sparsity_loss_single(Tensor::zeros({1, 2}), 0.0), std::invalid_argument);
        CHECK_THROWS_AS(sparsity_loss_single(Tensor::zeros({1, 2}), 1.0), std::invalid_argument);
    }
}

TEST_CASE("rho_hat averages over the instance's own latent codes") {
    // Two codes averaging exactly to rho per unit: loss is zero even though
    // neither code equals rho itself.
    const double rho = 0.05;
    Tensor z = Tensor::from_data({2, 2}, {0.02, 0.08, 0.08, 0.02});
    CHECK(sparsity_loss_single(z, rho).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("all loss gradients match finite differences") {
    Rng rng(11);
    SaeState s = random_sae(20, 8, rng);
    Tensor e_his = random_matrix(3, 20, rng);
    Tensor e_diff = random_matrix(3, 20, rng);

    auto build = [&]() {
        Tensor z_his = sae_encode(s, e_his);
        Tensor z_diff = sae_encode(s, e_diff);
        Tensor recon = recon_loss(e_his, sae_decode(s, z_his), e_diff, sae_decode(s, z_diff));
        Tensor sparse = sparsity_loss(z_his, z_diff, 0.05);
        return num::add(recon, num::scale(sparse, 0.37));
    };
    GradGraph g;
    {
        GraphScope scope(g);
        g.backward(build());
    }
    auto forward = [&]() {
        NoGradGuard no_grad;
        return build().item();
    };
    for (Tensor t : s.parameters()) {
        CHECK(max_rel_err(grad_of(t), finite_diff(t, forward)) < 1e-5);
    }
}

}  // TEST_SUITE
