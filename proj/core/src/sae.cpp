#include "dep/sae.hpp"

#include <cmath>
#include <stdexcept>

namespace dep {

namespace {

constexpr double kRhoClamp = 1e-6;

void check_cols(const char* op, const Tensor& t, int cols) {
    if (t.rank() != 2 || t.dim(1) != cols) {
        throw std::invalid_argument(std::string(op) + ": expected [n," + std::to_string(cols) +
                                    "], got " + t.shape_str());
    }
}

}  // namespace

SaeState make_sae(int input_dim, int latent_dim, bool requires_grad) {
    SaeState s;
    s.w_enc = Tensor::zeros({latent_dim, input_dim}, requires_grad);
    s.b_enc = Tensor::zeros({latent_dim}, requires_grad);
    s.w_dec = Tensor::zeros({input_dim, latent_dim}, requires_grad);
    s.b_dec = Tensor::zeros({input_dim}, requires_grad);
    return s;
}

Tensor sae_encode(const SaeState& state, const Tensor& e) {
    check_cols("sae_encode", e, state.input_dim());
    Tensor pre = num::add(num::matmul(e, num::transpose(state.w_enc)), state.b_enc);
    // Saturated f64 sigmoid rounds to exactly 0/1; keep codes strictly
    // inside the open interval the KL term needs.
    return num::clamp(num::sigmoid(pre), 1e-12, 1.0 - 1e-12);
}

Tensor sae_decode(const SaeState& state, const Tensor& z) {
    check_cols("sae_decode", z, state.latent_dim());
    return num::add(num::matmul(z, num::transpose(state.w_dec)), state.b_dec);
}

Tensor recon_loss(const Tensor& e_his, const Tensor& e_his_hat, const Tensor& e_diff,
                  const Tensor& e_diff_hat) {
    return num::add(num::smooth_l1_mean(e_his_hat, e_his),
                    num::smooth_l1_mean(e_diff_hat, e_diff));
}

Tensor recon_loss_single(const Tensor& e, const Tensor& e_hat) {
    return num::smooth_l1_mean(e_hat, e);
}

Tensor sparsity_loss_single(const Tensor& z, double rho) {
    if (z.rank() != 2 || z.dim(0) < 1) {
        throw std::invalid_argument("sparsity_loss: need at least one latent code, got " +
                                    z.shape_str());
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw std::invalid_argument("sparsity_loss: rho must lie in (0,1)");
    }
    const int d = z.dim(1);
    Tensor rho_hat = num::clamp(num::mean_rows(z), kRhoClamp, 1.0 - kRhoClamp);
    // KL(rho || rho_hat_j) = rho ln(rho/rho_hat_j) + (1-rho) ln((1-rho)/(1-rho_hat_j))
    const double const_term = rho * std::log(rho) + (1.0 - rho) * std::log(1.0 - rho);
    Tensor log_rho_hat = num::log(rho_hat);
    Tensor log_one_minus = num::log(num::add_const(num::scale(rho_hat, -1.0), 1.0));
    Tensor cross = num::add(num::scale(log_rho_hat, rho), num::scale(log_one_minus, 1.0 - rho));
    Tensor kl_sum = num::sum(num::add_const(num::scale(cross, -1.0), const_term));
    return num::scale(kl_sum, 1.0 / static_cast<double>(d));
}

Tensor sparsity_loss(const Tensor& z_his, const Tensor& z_diff, double rho) {
    if (z_his.rank() != 2 || z_diff.rank() != 2 || z_his.dim(1) != z_diff.dim(1)) {
        throw std::invalid_argument("sparsity_loss: latent shape mismatch");
    }
    return num::add(sparsity_loss_single(z_his, rho), sparsity_loss_single(z_diff, rho));
}

}  // namespace dep
