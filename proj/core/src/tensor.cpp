#include "dep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dep {

namespace {

thread_local GradGraph* t_active_graph = nullptr;
thread_local bool t_no_grad = false;

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
}

bool needs_grad(const Tensor& t) { return t.requires_grad(); }

// Non-leaf results require an active graph; constants never do.
GradGraph& require_graph(const char* op) {
    if (t_active_graph == nullptr) {
        throw std::logic_error(std::string(op) +
                               ": gradient-requiring op outside any GraphScope");
    }
    return *t_active_graph;
}

Tensor make_result(std::vector<int> shape, bool req) {
    Tensor t = Tensor::zeros(std::move(shape), false);
    t.impl()->requires_grad = req;
    t.impl()->is_leaf = !req;
    if (req) t.impl()->graph = t_active_graph;
    return t;
}

}  // namespace

namespace detail {
void TensorImpl::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}
}  // namespace detail

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    std::size_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(n, 0.0);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("from_data: shape/data length mismatch");
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

std::span<double> Tensor::mutable_data() {
    if (!impl_->is_leaf) {
        throw std::logic_error("mutable_data: only leaf tensors may be mutated");
    }
    return impl_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item: tensor is not scalar, shape " + shape_str());
    return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
    if (impl_->grad.empty()) {
        throw std::logic_error("grad: no gradient accumulated");
    }
    return impl_->grad;
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < impl_->shape.size(); ++i) {
        if (i) os << 'x';
        os << impl_->shape[i];
    }
    os << ']';
    return os.str();
}

void GradGraph::record(std::vector<Tensor> inputs, Tensor output,
                       std::function<void()> backward_fn) {
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward_fn)});
}

void GradGraph::backward(const Tensor& root) {
    if (backward_done_) {
        throw std::logic_error("backward: already run on this graph; reset() first");
    }
    if (root.numel() != 1) {
        throw std::logic_error("backward: root must be scalar, shape " + root.shape_str());
    }
    if (root.is_leaf() || root.impl()->graph != this) {
        throw std::logic_error("backward: root was not produced on this graph");
    }
    backward_done_ = true;
    root.impl()->ensure_grad();
    root.impl()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output.impl()->grad.empty()) continue;  // no contribution reached it
        it->backward_fn();
    }
}

void GradGraph::reset() {
    nodes_.clear();
    backward_done_ = false;
}

GraphScope::GraphScope(GradGraph& g) : prev_(t_active_graph) { t_active_graph = &g; }
GraphScope::~GraphScope() { t_active_graph = prev_; }

GradGraph* active_graph() { return t_active_graph; }

NoGradGuard::NoGradGuard() : prev_(t_no_grad) { t_no_grad = true; }
NoGradGuard::~NoGradGuard() { t_no_grad = prev_; }

namespace num {

namespace {

// Shared skeleton: forward fills `out`; if grads are needed the node is
// recorded with the provided pull-back.
Tensor finish(const char* op, std::vector<Tensor> inputs, Tensor out,
              std::function<void()> backward_fn) {
    bool req = false;
    if (!t_no_grad) {
        for (const auto& t : inputs) req = req || needs_grad(t);
    }
    if (req) {
        GradGraph& g = require_graph(op);
        out.impl()->requires_grad = true;
        out.impl()->is_leaf = false;
        out.impl()->graph = &g;
        g.record(std::move(inputs), out, std::move(backward_fn));
    }
    return out;
}

void check_2d(const char* op, const Tensor& t) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                    t.shape_str());
    }
}

}  // namespace

double gelu_scalar(double x) {
    constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687;
    double u = kSqrt2OverPi * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d("matmul", a);
    check_2d("matmul", b);
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) shape_error("matmul", a, b);

    Tensor out = make_result({m, n}, false);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int t = 0; t < k; ++t) {
            const double av = arow[t];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(t) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }

    return finish("matmul", {a, b}, out, [a, b, out, m, k, n]() {
        const double* gout = out.impl()->grad.data();
        if (a.requires_grad()) {
            a.impl()->ensure_grad();
            double* ga = a.impl()->grad.data();
            const double* pb = b.data().data();
            // dA = dC * B^T
            for (int i = 0; i < m; ++i) {
                const double* grow = gout + static_cast<std::size_t>(i) * n;
                double* garow = ga + static_cast<std::size_t>(i) * k;
                for (int t = 0; t < k; ++t) {
                    const double* brow = pb + static_cast<std::size_t>(t) * n;
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                    garow[t] += s;
                }
            }
        }
        if (b.requires_grad()) {
            b.impl()->ensure_grad();
            double* gb = b.impl()->grad.data();
            const double* pa = a.data().data();
            // dB = A^T * dC
            for (int t = 0; t < k; ++t) {
                double* gbrow = gb + static_cast<std::size_t>(t) * n;
                for (int i = 0; i < m; ++i) {
                    const double av = pa[static_cast<std::size_t>(i) * k + t];
                    if (av == 0.0) continue;
                    const double* grow = gout + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check_2d("transpose", a);
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make_result({n, m}, false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            po[static_cast<std::size_t>(j) * m + i] = pa[static_cast<std::size_t>(i) * n + j];
        }
    }
    return finish("transpose", {a}, out, [a, out, m, n]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        double* ga = a.impl()->grad.data();
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < m; ++i) {
                ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
            }
        }
    });
}

namespace {

enum class BroadcastKind { Same, RowVector, ScalarRight, ScalarLeft };

BroadcastKind classify_broadcast(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return BroadcastKind::Same;
    if (b.numel() == 1) return BroadcastKind::ScalarRight;
    if (a.numel() == 1) return BroadcastKind::ScalarLeft;
    if (a.rank() == 2 && ((b.rank() == 1 && b.dim(0) == a.dim(1)) ||
                          (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == a.dim(1)))) {
        return BroadcastKind::RowVector;
    }
    shape_error(op, a, b);
}

template <class Fwd, class DL, class DR>
Tensor binary_broadcast(const char* op, const Tensor& a, const Tensor& b, Fwd f, DL dl, DR dr) {
    BroadcastKind kind = classify_broadcast(op, a, b);
    std::vector<int> out_shape =
        (kind == BroadcastKind::ScalarLeft) ? b.shape() : a.shape();
    Tensor out = make_result(out_shape, false);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.impl()->data.data();
    const std::size_t n = out.numel();
    const std::size_t bn = b.numel();
    const std::size_t an = a.numel();
    switch (kind) {
        case BroadcastKind::Same:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
            break;
        case BroadcastKind::RowVector:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i % bn]);
            break;
        case BroadcastKind::ScalarRight:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[0]);
            break;
        case BroadcastKind::ScalarLeft:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[0], pb[i]);
            break;
    }
    return finish(op, {a, b}, out, [a, b, out, kind, dl, dr, n, an, bn]() {
        const double* g = out.impl()->grad.data();
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        if (a.requires_grad()) {
            a.impl()->ensure_grad();
            double* ga = a.impl()->grad.data();
            switch (kind) {
                case BroadcastKind::Same:
                    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * dl(pa[i], pb[i]);
                    break;
                case BroadcastKind::RowVector:
                case BroadcastKind::ScalarRight:
                    for (std::size_t i = 0; i < n; ++i) {
                        ga[i] += g[i] * dl(pa[i], pb[kind == BroadcastKind::RowVector ? i % bn : 0]);
                    }
                    break;
                case BroadcastKind::ScalarLeft:
                    for (std::size_t i = 0; i < n; ++i) ga[0] += g[i] * dl(pa[0], pb[i]);
                    break;
            }
        }
        if (b.requires_grad()) {
            b.impl()->ensure_grad();
            double* gb = b.impl()->grad.data();
            switch (kind) {
                case BroadcastKind::Same:
                    for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * dr(pa[i], pb[i]);
                    break;
                case BroadcastKind::RowVector:
                    for (std::size_t i = 0; i < n; ++i) {
                        gb[i % bn] += g[i] * dr(pa[i], pb[i % bn]);
                    }
                    break;
                case BroadcastKind::ScalarRight:
                    for (std::size_t i = 0; i < n; ++i) gb[0] += g[i] * dr(pa[i], pb[0]);
                    break;
                case BroadcastKind::ScalarLeft:
                    for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * dr(pa[0], pb[i]);
                    break;
            }
        }
        (void)an;
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

namespace {

template <class Fwd, class Deriv>
Tensor unary_op(const char* op, const Tensor& a, Fwd f, Deriv df) {
    Tensor out = make_result(a.shape(), false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i]);
    return finish(op, {a}, out, [a, out, df, n]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        const double* pa = a.data().data();
        const double* po = out.data().data();
        double* ga = a.impl()->grad.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * df(pa[i], po[i]);
    });
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
    return unary_op(
        "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_const(const Tensor& a, double c) {
    return unary_op(
        "add_const", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) {
                double e = std::exp(-x);
                return 1.0 / (1.0 + e);
            }
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
    constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687;
    return unary_op(
        "gelu", a, [](double x) { return gelu_scalar(x); },
        [](double x, double) {
            double u = kSqrt2OverPi * (x + 0.044715 * x * x * x);
            double t = std::tanh(u);
            double du = kSqrt2OverPi * (1.0 + 3.0 * 0.044715 * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        });
}

Tensor log(const Tensor& a) {
    return unary_op(
        "log", a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_op(
        "clamp", a,
        [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
    check_2d("softmax_rows", a);
    const int m = a.dim(0), n = a.dim(1);
    if (n < 1) throw std::invalid_argument("softmax_rows: empty axis");
    Tensor out = make_result({m, n}, false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        const double* row = pa + static_cast<std::size_t>(i) * n;
        double* orow = po + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= z;
    }
    return finish("softmax_rows", {a}, out, [a, out, m, n]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        const double* y = out.data().data();
        double* ga = a.impl()->grad.data();
        for (int i = 0; i < m; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * n;
            const double* yrow = y + static_cast<std::size_t>(i) * n;
            double* garow = ga + static_cast<std::size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
            for (int j = 0; j < n; ++j) garow[j] += yrow[j] * (grow[j] - dot);
        }
    });
}

Tensor layernorm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    check_2d("layernorm_rows", a);
    const int m = a.dim(0), n = a.dim(1);
    if (n < 1) throw std::invalid_argument("layernorm_rows: empty axis");
    if (gain.numel() != static_cast<std::size_t>(n) || bias.numel() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("layernorm_rows: gain/bias must have length " +
                                    std::to_string(n));
    }
    Tensor out = make_result({m, n}, false);
    // Normalized rows are kept for the pull-back.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
    const double* pa = a.data().data();
    const double* pg = gain.data().data();
    const double* pb = bias.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        const double* row = pa + static_cast<std::size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += row[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = row[j] - mu;
            var += d * d;
        }
        var /= n;
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(i)] = is;
        double* xh = xhat->data() + static_cast<std::size_t>(i) * n;
        double* orow = po + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            xh[j] = (row[j] - mu) * is;
            orow[j] = pg[j] * xh[j] + pb[j];
        }
    }
    return finish("layernorm_rows", {a, gain, bias}, out, [a, gain, bias, out, xhat, inv_std, m, n]() {
        const double* g = out.impl()->grad.data();
        const double* pg = gain.data().data();
        if (gain.requires_grad()) {
            gain.impl()->ensure_grad();
            double* gg = gain.impl()->grad.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + static_cast<std::size_t>(i) * n;
                const double* xh = xhat->data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gg[j] += grow[j] * xh[j];
            }
        }
        if (bias.requires_grad()) {
            bias.impl()->ensure_grad();
            double* gb = bias.impl()->grad.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gb[j] += grow[j];
            }
        }
        if (a.requires_grad()) {
            a.impl()->ensure_grad();
            double* ga = a.impl()->grad.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + static_cast<std::size_t>(i) * n;
                const double* xh = xhat->data() + static_cast<std::size_t>(i) * n;
                const double is = (*inv_std)[static_cast<std::size_t>(i)];
                double* garow = ga + static_cast<std::size_t>(i) * n;
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double dxh = grow[j] * pg[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh[j];
                }
                mean_dxhat /= n;
                mean_dxhat_xhat /= n;
                for (int j = 0; j < n; ++j) {
                    const double dxh = grow[j] * pg[j];
                    garow[j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                }
            }
        }
    });
}

Tensor sum(const Tensor& a) {
    Tensor out = make_result({1}, false);
    const double* pa = a.data().data();
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += pa[i];
    out.impl()->data[0] = s;
    return finish("sum", {a}, out, [a, out]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double g = out.impl()->grad[0];
        double* ga = a.impl()->grad.data();
        for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g;
    });
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    Tensor out = make_result({1}, false);
    const double* pa = a.data().data();
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += pa[i];
    out.impl()->data[0] = s * inv;
    return finish("mean", {a}, out, [a, out, inv]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double g = out.impl()->grad[0] * inv;
        double* ga = a.impl()->grad.data();
        for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g;
    });
}

Tensor mean_rows(const Tensor& a) {
    check_2d("mean_rows", a);
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make_result({n}, false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        const double* row = pa + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) po[j] += row[j];
    }
    const double inv = 1.0 / m;
    for (int j = 0; j < n; ++j) po[j] *= inv;
    return finish("mean_rows", {a}, out, [a, out, m, n, inv]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        double* ga = a.impl()->grad.data();
        for (int i = 0; i < m; ++i) {
            double* garow = ga + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) garow[j] += g[j] * inv;
        }
    });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    check_2d("slice_cols", a);
    const int m = a.dim(0), n = a.dim(1);
    if (c0 < 0 || c1 > n || c0 >= c1) {
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for " + a.shape_str());
    }
    const int w = c1 - c0;
    Tensor out = make_result({m, w}, false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < m; ++i) {
        const double* row = pa + static_cast<std::size_t>(i) * n + c0;
        double* orow = po + static_cast<std::size_t>(i) * w;
        std::copy(row, row + w, orow);
    }
    return finish("slice_cols", {a}, out, [a, out, m, n, w, c0]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        double* ga = a.impl()->grad.data();
        for (int i = 0; i < m; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * w;
            double* garow = ga + static_cast<std::size_t>(i) * n + c0;
            for (int j = 0; j < w; ++j) garow[j] += grow[j];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int m = parts[0].dim(0);
    int n = 0;
    for (const auto& p : parts) {
        check_2d("concat_cols", p);
        if (p.dim(0) != m) shape_error("concat_cols", parts[0], p);
        n += p.dim(1);
    }
    Tensor out = make_result({m, n}, false);
    double* po = out.impl()->data.data();
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.dim(1);
        const double* pp = p.data().data();
        for (int i = 0; i < m; ++i) {
            std::copy(pp + static_cast<std::size_t>(i) * w, pp + static_cast<std::size_t>(i) * w + w,
                      po + static_cast<std::size_t>(i) * n + off);
        }
        off += w;
    }
    return finish("concat_cols", parts, out, [parts, out, m, n]() {
        const double* g = out.impl()->grad.data();
        int off = 0;
        for (const auto& p : parts) {
            const int w = p.dim(1);
            if (p.requires_grad()) {
                p.impl()->ensure_grad();
                double* gp = p.impl()->grad.data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n + off;
                    double* prow = gp + static_cast<std::size_t>(i) * w;
                    for (int j = 0; j < w; ++j) prow[j] += grow[j];
                }
            }
            off += w;
        }
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
    check_2d("gather_rows", a);
    const int m = a.dim(0), n = a.dim(1);
    for (int r : rows) {
        if (r < 0 || r >= m) {
            throw std::invalid_argument("gather_rows: row " + std::to_string(r) +
                                        " out of range for " + a.shape_str());
        }
    }
    const int k = static_cast<int>(rows.size());
    Tensor out = make_result({k, n}, false);
    const double* pa = a.data().data();
    double* po = out.impl()->data.data();
    for (int i = 0; i < k; ++i) {
        const double* src = pa + static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]) * n;
        std::copy(src, src + n, po + static_cast<std::size_t>(i) * n);
    }
    return finish("gather_rows", {a}, out, [a, out, rows, n, k]() {
        if (!a.requires_grad()) return;
        a.impl()->ensure_grad();
        const double* g = out.impl()->grad.data();
        double* ga = a.impl()->grad.data();
        for (int i = 0; i < k; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * n;
            double* garow = ga + static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]) * n;
            for (int j = 0; j < n; ++j) garow[j] += grow[j];
        }
    });
}

Tensor compose_rows(const std::vector<Tensor>& sources,
                    const std::vector<std::pair<int, int>>& picks) {
    if (sources.empty()) throw std::invalid_argument("compose_rows: no sources");
    const int n = sources[0].dim(1);
    for (const Tensor& s : sources) {
        check_2d("compose_rows", s);
        if (s.dim(1) != n) shape_error("compose_rows", sources[0], s);
    }
    for (const auto& [src, row] : picks) {
        if (src < 0 || src >= static_cast<int>(sources.size()) || row < 0 ||
            row >= sources[static_cast<std::size_t>(src)].dim(0)) {
            throw std::invalid_argument("compose_rows: pick out of range");
        }
    }
    const int k = static_cast<int>(picks.size());
    if (k == 0) throw std::invalid_argument("compose_rows: no picks");
    Tensor out = make_result({k, n}, false);
    double* po = out.impl()->data.data();
    for (int i = 0; i < k; ++i) {
        const auto& [src, row] = picks[static_cast<std::size_t>(i)];
        const double* prow = sources[static_cast<std::size_t>(src)].data().data() +
                             static_cast<std::size_t>(row) * n;
        std::copy(prow, prow + n, po + static_cast<std::size_t>(i) * n);
    }
    return finish("compose_rows", sources, out, [sources, out, picks, n, k]() {
        const double* g = out.impl()->grad.data();
        for (int i = 0; i < k; ++i) {
            const auto& [src, row] = picks[static_cast<std::size_t>(i)];
            const Tensor& s = sources[static_cast<std::size_t>(src)];
            if (!s.requires_grad()) continue;
            s.impl()->ensure_grad();
            double* grow = s.impl()->grad.data() + static_cast<std::size_t>(row) * n;
            const double* gout = g + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) grow[j] += gout[j];
        }
    });
}

Tensor inject_rows(const Tensor& base, const std::vector<int>& positions, const Tensor& patch) {
    check_2d("inject_rows", base);
    check_2d("inject_rows", patch);
    const int m = base.dim(0), n = base.dim(1);
    if (patch.dim(1) != n || patch.dim(0) != static_cast<int>(positions.size())) {
        shape_error("inject_rows", base, patch);
    }
    for (int p : positions) {
        if (p < 0 || p >= m) {
            throw std::invalid_argument("inject_rows: position " + std::to_string(p) +
                                        " out of range for " + base.shape_str());
        }
    }
    Tensor out = make_result({m, n}, false);
    std::copy(base.data().begin(), base.data().end(), out.impl()->data.begin());
    const double* pp = patch.data().data();
    double* po = out.impl()->data.data();
    const int k = static_cast<int>(positions.size());
    for (int i = 0; i < k; ++i) {
        std::copy(pp + static_cast<std::size_t>(i) * n, pp + static_cast<std::size_t>(i) * n + n,
                  po + static_cast<std::size_t>(positions[static_cast<std::size_t>(i)]) * n);
    }
    return finish("inject_rows", {base, patch}, out, [base, patch, out, positions, m, n, k]() {
        const double* g = out.impl()->grad.data();
        if (patch.requires_grad()) {
            patch.impl()->ensure_grad();
            double* gp = patch.impl()->grad.data();
            for (int i = 0; i < k; ++i) {
                const double* grow =
                    g + static_cast<std::size_t>(positions[static_cast<std::size_t>(i)]) * n;
                double* prow = gp + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) prow[j] += grow[j];
            }
        }
        if (base.requires_grad()) {
            base.impl()->ensure_grad();
            std::vector<bool> replaced(static_cast<std::size_t>(m), false);
            for (int p : positions) replaced[static_cast<std::size_t>(p)] = true;
            double* gb = base.impl()->grad.data();
            for (int i = 0; i < m; ++i) {
                if (replaced[static_cast<std::size_t>(i)]) continue;
                const double* grow = g + static_cast<std::size_t>(i) * n;
                double* brow = gb + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) brow[j] += grow[j];
            }
        }
    });
}

Tensor smooth_l1_mean(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) shape_error("smooth_l1_mean", pred, target);
    const std::size_t n = pred.numel();
    Tensor out = make_result({1}, false);
    const double* pp = pred.data().data();
    const double* pt = target.data().data();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pp[i] - pt[i];
        const double ad = std::abs(d);
        s += (ad < 1.0) ? 0.5 * d * d : ad - 0.5;
    }
    out.impl()->data[0] = s / static_cast<double>(n);
    return finish("smooth_l1_mean", {pred, target}, out, [pred, target, out, n]() {
        const double g = out.impl()->grad[0] / static_cast<double>(n);
        const double* pp = pred.data().data();
        const double* pt = target.data().data();
        if (pred.requires_grad()) {
            pred.impl()->ensure_grad();
            double* gp = pred.impl()->grad.data();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pp[i] - pt[i];
                gp[i] += g * (d < -1.0 ? -1.0 : (d > 1.0 ? 1.0 : d));
            }
        }
        if (target.requires_grad()) {
            target.impl()->ensure_grad();
            double* gt = target.impl()->grad.data();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pp[i] - pt[i];
                gt[i] -= g * (d < -1.0 ? -1.0 : (d > 1.0 ? 1.0 : d));
            }
        }
    });
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& positions,
                          const std::vector<int>& targets) {
    check_2d("cross_entropy_mean", logits);
    if (positions.size() != targets.size() || positions.empty()) {
        throw std::invalid_argument("cross_entropy_mean: positions/targets mismatch or empty");
    }
    const int m = logits.dim(0), v = logits.dim(1);
    for (std::size_t k = 0; k < positions.size(); ++k) {
        if (positions[k] < 0 || positions[k] >= m || targets[k] < 0 || targets[k] >= v) {
            throw std::invalid_argument("cross_entropy_mean: index out of range");
        }
    }
    const std::size_t cnt = positions.size();
    Tensor out = make_result({1}, false);
    const double* pl = logits.data().data();
    double loss = 0.0;
    for (std::size_t k = 0; k < cnt; ++k) {
        const double* row = pl + static_cast<std::size_t>(positions[k]) * v;
        double mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        loss += (std::log(z) + mx) - row[targets[k]];
    }
    out.impl()->data[0] = loss / static_cast<double>(cnt);
    return finish("cross_entropy_mean", {logits}, out, [logits, out, positions, targets, v, cnt]() {
        if (!logits.requires_grad()) return;
        logits.impl()->ensure_grad();
        const double g = out.impl()->grad[0] / static_cast<double>(cnt);
        const double* pl = logits.data().data();
        double* gl = logits.impl()->grad.data();
        for (std::size_t k = 0; k < cnt; ++k) {
            const double* row = pl + static_cast<std::size_t>(positions[k]) * v;
            double* grow = gl + static_cast<std::size_t>(positions[k]) * v;
            double mx = row[0];
            for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
            double z = 0.0;
            for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
            for (int j = 0; j < v; ++j) {
                const double p = std::exp(row[j] - mx) / z;
                grow[j] += g * (p - (j == targets[k] ? 1.0 : 0.0));
            }
        }
    });
}

}  // namespace num
}  // namespace dep
