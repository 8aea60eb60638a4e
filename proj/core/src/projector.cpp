#include "dep/projector.hpp"

#include <stdexcept>

namespace dep {

namespace {

Mlp2 make_mlp(int in_dim, int hidden_dim, int out_dim, bool requires_grad) {
    Mlp2 m;
    m.w1 = Tensor::zeros({hidden_dim, in_dim}, requires_grad);
    m.b1 = Tensor::zeros({hidden_dim}, requires_grad);
    m.w2 = Tensor::zeros({out_dim, hidden_dim}, requires_grad);
    m.b2 = Tensor::zeros({out_dim}, requires_grad);
    return m;
}

Tensor run_mlp(const Mlp2& m, const Tensor& z) {
    if (z.rank() != 2 || z.dim(1) != m.in_dim()) {
        throw std::invalid_argument("projector: expected [n," + std::to_string(m.in_dim()) +
                                    "], got " + z.shape_str());
    }
    Tensor h = num::gelu(num::add(num::matmul(z, num::transpose(m.w1)), m.b1));
    return num::add(num::matmul(h, num::transpose(m.w2)), m.b2);
}

}  // namespace

ProjectorState make_projector(int in_dim, int hidden_dim, int out_dim, bool requires_grad) {
    ProjectorState s;
    s.his = make_mlp(in_dim, hidden_dim, out_dim, requires_grad);
    s.diff = make_mlp(in_dim, hidden_dim, out_dim, requires_grad);
    return s;
}

Tensor project_his(const ProjectorState& state, const Tensor& z) { return run_mlp(state.his, z); }

Tensor project_diff(const ProjectorState& state, const Tensor& z) { return run_mlp(state.diff, z); }

}  // namespace dep
