#pragma once

// Sparse autoencoder: sigmoid encoder 1024 -> 512, affine decoder back,
// shared by the his and diff streams. Supplies the reconstruction
// (smooth-L1) and sparsity (Bernoulli KL toward a target mean activation)
// losses. The sigmoid keeps every latent in (0,1), which is what makes
// the KL term well-defined.

#include <vector>

#include "dep/tensor.hpp"

namespace dep {

struct SaeState {
    Tensor w_enc;  // [latent, input]
    Tensor b_enc;  // [latent]
    Tensor w_dec;  // [input, latent]
    Tensor b_dec;  // [input]

    int input_dim() const { return w_enc.dim(1); }
    int latent_dim() const { return w_enc.dim(0); }
    std::vector<Tensor> parameters() const { return {w_enc, b_enc, w_dec, b_dec}; }
};

SaeState make_sae(int input_dim, int latent_dim, bool requires_grad = true);

// z = sigmoid(W_enc e + b_enc). Rows of `e` [n, input] are encoded
// independently; result is [n, latent], entries strictly inside (0,1).
Tensor sae_encode(const SaeState& state, const Tensor& e);

// e_hat = W_dec z + b_dec (affine, no output nonlinearity); [n, latent] ->
// [n, input].
Tensor sae_decode(const SaeState& state, const Tensor& z);

// SmoothL1(e_his, e_his_hat) + SmoothL1(e_diff, e_diff_hat), each a mean
// over every coordinate of every history (beta = 1).
Tensor recon_loss(const Tensor& e_his, const Tensor& e_his_hat, const Tensor& e_diff,
                  const Tensor& e_diff_hat);
// Single-stream variant for ablations that carry only one embedding type.
Tensor recon_loss_single(const Tensor& e, const Tensor& e_hat);

// rho_hat = per-unit mean of the instance's latent codes; loss =
// (1/d') sum_j KL(rho || rho_hat_his_j) + (1/d') sum_j KL(rho || rho_hat_diff_j)
// with Bernoulli KL and rho_hat clamped to [1e-6, 1 - 1e-6].
Tensor sparsity_loss(const Tensor& z_his, const Tensor& z_diff, double rho);
Tensor sparsity_loss_single(const Tensor& z, double rho);

}  // namespace dep
