#include "dep/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dep {

AdamW::AdamW(std::vector<Tensor> params, const AdamWOptions& options)
    : params_(std::move(params)), opt_(options) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

double AdamW::current_lr() const {
    if (opt_.warmup_steps > 0 && t_ < opt_.warmup_steps) {
        return opt_.lr * static_cast<double>(t_ + 1) / static_cast<double>(opt_.warmup_steps);
    }
    if (opt_.decay_steps > opt_.warmup_steps && t_ < opt_.decay_steps) {
        const double progress = static_cast<double>(t_ - opt_.warmup_steps) /
                                static_cast<double>(opt_.decay_steps - opt_.warmup_steps);
        const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
        return opt_.lr * (opt_.min_lr_factor + (1.0 - opt_.min_lr_factor) * cosine);
    }
    if (opt_.decay_steps > 0) return opt_.lr * opt_.min_lr_factor;
    return opt_.lr;
}

void AdamW::step(double grad_scale) {
    const double lr = current_lr();
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        if (!p.has_grad()) {
            // No gradient reached this parameter this step; decoupled decay
            // still applies.
            auto data = p.mutable_data();
            if (opt_.weight_decay != 0.0) {
                for (double& x : data) x -= lr * opt_.weight_decay * x;
            }
            continue;
        }
        auto grad = p.grad();
        auto data = p.mutable_data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i] * grad_scale;
            m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g;
            v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * data[i]);
        }
        p.zero_grad();
    }
}

void AdamW::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

void AdamW::restore_moments(const std::vector<std::vector<double>>& m,
                            const std::vector<std::vector<double>>& v, std::int64_t steps) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
        throw std::invalid_argument("AdamW: moment shape mismatch on restore");
    }
    m_ = m;
    v_ = v;
    t_ = steps;
}

void xavier_uniform(Tensor& w, Rng& rng) {
    if (w.rank() != 2) throw std::invalid_argument("xavier_uniform: expected 2-D weight");
    const double fan_out = w.dim(0);
    const double fan_in = w.dim(1);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    auto data = w.mutable_data();
    for (double& x : data) x = rng.next_uniform(-bound, bound);
}

std::uint64_t params_hash(const std::vector<Tensor>& params) {
    HashAccumulator h;
    h.update("params-v1");
    for (const Tensor& p : params) {
        for (int e : p.shape()) h.update_u64(static_cast<std::uint64_t>(e));
        for (double v : p.data()) h.update_f64(v);
    }
    return h.digest();
}

}  // namespace dep
