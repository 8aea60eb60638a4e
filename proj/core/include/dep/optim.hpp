#pragma once

// AdamW (decoupled weight decay) with linear warmup, plus the seeded
// Xavier-uniform initializer used for every trainable matrix.

#include <cstdint>
#include <vector>

#include "dep/hash.hpp"
#include "dep/tensor.hpp"

namespace dep {

struct AdamWOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    // Linear ramp: effective lr at step t (0-based) is lr*(t+1)/warmup_steps
    // until the ramp ends, lr afterwards.
    int warmup_steps = 0;
    // When decay_steps > 0, lr follows a cosine from lr down to
    // lr*min_lr_factor between the end of warmup and decay_steps.
    int decay_steps = 0;
    double min_lr_factor = 0.1;
};

class AdamW {
  public:
    AdamW(std::vector<Tensor> params, const AdamWOptions& options);

    // Applies one update from the accumulated grads (scaled by grad_scale,
    // e.g. 1/accumulation_steps) and zeroes them.
    void step(double grad_scale = 1.0);
    void zero_grad();

    double current_lr() const;  // lr the next step() will use
    std::int64_t steps_taken() const { return t_; }

    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore_moments(const std::vector<std::vector<double>>& m,
                         const std::vector<std::vector<double>>& v, std::int64_t steps);

  private:
    std::vector<Tensor> params_;
    AdamWOptions opt_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t t_ = 0;
};

// Uniform in [-b, b], b = sqrt(6/(fan_in+fan_out)), for a [fan_out, fan_in]
// matrix; deterministic per rng stream.
void xavier_uniform(Tensor& w, Rng& rng);

std::uint64_t params_hash(const std::vector<Tensor>& params);

}  // namespace dep
