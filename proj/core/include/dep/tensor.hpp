#pragma once

// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// Ops record nodes on the active GradGraph only when some input needs a
// gradient; pure-constant arithmetic never touches a graph and is safe to
// run without one. A graph is single-threaded; constants (requires_grad
// false) are immutable after creation and may be shared across threads.
//
// Typical use:
//   GradGraph g;
//   GraphScope scope(g);
//   Tensor loss = num::mean(num::gelu(num::matmul(x, w)));
//   g.backward(loss);            // leaf .grad now holds d(loss)/d(leaf)

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dep {

class GradGraph;

namespace detail {

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    bool is_leaf = true;
    GradGraph* graph = nullptr;  // graph that produced this (non-leaf only)

    std::size_t numel() const { return data.size(); }
    void ensure_grad();
};

}  // namespace detail

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->numel(); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    // Row-major element access.
    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data();
    double item() const;
    double at(int i) const { return impl_->data[static_cast<std::size_t>(i)]; }
    double at(int i, int j) const {
        return impl_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(impl_->shape[1]) +
                           static_cast<std::size_t>(j)];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    bool is_leaf() const { return impl_->is_leaf; }
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad();

    std::string shape_str() const;

    detail::TensorImpl* impl() const { return impl_.get(); }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend class GradGraph;
    friend Tensor make_op_output(std::vector<int>, bool);
};

// Ordered record of performed operations; backward walks it in reverse.
class GradGraph {
  public:
    GradGraph() = default;
    GradGraph(const GradGraph&) = delete;
    GradGraph& operator=(const GradGraph&) = delete;

    // Accumulates d(root)/d(leaf) into every requires_grad leaf's grad.
    // root must be a scalar produced on this graph. A second call without
    // reset() is an error.
    void backward(const Tensor& root);

    // Clears the backward-done flag and drops recorded nodes so the graph
    // object can be reused for a fresh forward pass. Leaf grads are left
    // untouched (they accumulate across graphs until the optimizer clears
    // them).
    void reset();

    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward_fn);

  private:
    struct Node {
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// RAII binding of the calling thread's active graph.
class GraphScope {
  public:
    explicit GraphScope(GradGraph& g);
    ~GraphScope();
    GraphScope(const GraphScope&) = delete;
    GraphScope& operator=(const GraphScope&) = delete;

  private:
    GradGraph* prev_;
};

GradGraph* active_graph();

// Suppresses recording while alive: ops behave as constant arithmetic even
// on requires_grad inputs (their outputs are plain constants).
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

namespace num {

// C[i,j] = sum_t A[i,t] * B[t,j]; dA = dC * B^T, dB = A^T * dC.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Broadcasting add/sub/mul: identical shapes, or [m,n] (+) [n] row
// broadcast, or either side a scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);

Tensor sigmoid(const Tensor& a);
// tanh-form GELU: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
Tensor gelu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Softmax over the last axis of a 2-D tensor (rows).
Tensor softmax_rows(const Tensor& a);
// Per-row layer normalization with learnable gain/bias, epsilon 1e-5.
Tensor layernorm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                      double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Column means of a 2-D tensor: [n,d] -> [d].
Tensor mean_rows(const Tensor& a);

Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Gather rows of a [n,d] tensor: out[k] = a[rows[k]]; backward scatter-adds.
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);

// out[k] = sources[picks[k].first].row(picks[k].second); all sources share
// a column count. Backward scatter-adds into the picked rows.
Tensor compose_rows(const std::vector<Tensor>& sources,
                    const std::vector<std::pair<int, int>>& picks);

// Copy of `base` with base[positions[k]] replaced by patch[k]. Gradients
// flow to both: d(base) everywhere except replaced rows, d(patch) at them.
Tensor inject_rows(const Tensor& base, const std::vector<int>& positions, const Tensor& patch);

// Mean over all coordinates of smooth-L1(pred - target), beta = 1.
Tensor smooth_l1_mean(const Tensor& pred, const Tensor& target);

// Mean cross-entropy of logits rows at `positions` against `targets`
// (same length): mean_k [ logsumexp(logits[positions[k]]) -
// logits[positions[k], targets[k]] ].
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& positions,
                          const std::vector<int>& targets);

double gelu_scalar(double x);

}  // namespace num
}  // namespace dep
