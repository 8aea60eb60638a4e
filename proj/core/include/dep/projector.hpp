#pragma once

// Two independent 2-layer GELU MLPs mapping latent codes into the LM's
// embedding space as soft prompt vectors; the HIS and DIFF networks share
// no parameters, so updating one never moves the other's outputs.

#include <vector>

#include "dep/tensor.hpp"

namespace dep {

struct Mlp2 {
    Tensor w1;  // [hidden, in]
    Tensor b1;  // [hidden]
    Tensor w2;  // [out, hidden]
    Tensor b2;  // [out]

    int in_dim() const { return w1.dim(1); }
    int out_dim() const { return w2.dim(0); }
};

struct ProjectorState {
    Mlp2 his;
    Mlp2 diff;

    std::vector<Tensor> parameters() const {
        return {his.w1, his.b1, his.w2, his.b2, diff.w1, diff.b1, diff.w2, diff.b2};
    }
};

ProjectorState make_projector(int in_dim, int hidden_dim, int out_dim, bool requires_grad = true);

// W2 gelu(W1 z + b1) + b2 applied rowwise; [n, in] -> [n, out].
Tensor project_his(const ProjectorState& state, const Tensor& z);
Tensor project_diff(const ProjectorState& state, const Tensor& z);

}  // namespace dep
