#include "crn/tensor.hpp"

#include "crn/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace crn {

namespace detail {

struct Node {
    std::uint64_t id = 0;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
};

namespace {
std::atomic<std::uint64_t> next_node_id{1};

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("tensor of shape " + shape_to_string(shape) + " cannot hold " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    node->shape = std::move(shape);
    node->value = std::move(values);
    return node;
}
}  // namespace

}  // namespace detail

struct TensorAccess {
    static detail::Node& node(const Tensor& t) {
        if (!t.node_) throw ContractError("use of an undefined tensor");
        return *t.node_;
    }
    static const std::shared_ptr<detail::Node>& ptr(const Tensor& t) { return t.node_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }
};

using detail::Node;

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_size(shape);
    return Tensor(detail::new_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(detail::new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    auto node = detail::new_node(std::move(shape), std::move(values));
    node->requires_grad = true;
    return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    Eigen::Map<RowMatrix>(v.data(), m.rows(), m.cols()) = m;
    return constant({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                    std::move(v));
}

const Shape& Tensor::shape() const { return TensorAccess::node(*this).shape; }

std::size_t Tensor::extent(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_to_string(s));
    }
    return s[axis];
}

std::size_t Tensor::size() const { return TensorAccess::node(*this).value.size(); }
std::uint64_t Tensor::id() const { return TensorAccess::node(*this).id; }

std::span<const double> Tensor::values() const { return TensorAccess::node(*this).value; }
std::span<double> Tensor::mutable_values() { return TensorAccess::node(*this).value; }

double Tensor::item() const {
    const auto& v = TensorAccess::node(*this).value;
    if (v.size() != 1) {
        throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
    }
    return v[0];
}

bool Tensor::requires_grad() const { return TensorAccess::node(*this).requires_grad; }

void Tensor::set_requires_grad(bool on) {
    auto& n = TensorAccess::node(*this);
    if (!n.leaf) throw ContractError("requires_grad can only be toggled on leaf tensors");
    n.requires_grad = on;
}

bool Tensor::is_leaf() const { return TensorAccess::node(*this).leaf; }
bool Tensor::has_grad() const { return !TensorAccess::node(*this).grad.empty(); }
std::span<const double> Tensor::grad() const { return TensorAccess::node(*this).grad; }

void Tensor::zero_grad() {
    auto& n = TensorAccess::node(*this);
    n.grad.assign(n.value.size(), 0.0);
}

void Tensor::clear_grad() { TensorAccess::node(*this).grad.clear(); }

Tensor Tensor::detach() const {
    const auto& n = TensorAccess::node(*this);
    return constant(n.shape, n.value);
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
    const auto& n = TensorAccess::node(*this);
    Eigen::Index cols = n.shape.empty() ? 1 : static_cast<Eigen::Index>(n.shape.back());
    Eigen::Index rows = cols == 0 ? 0 : static_cast<Eigen::Index>(n.value.size()) / cols;
    return {n.value.data(), rows, cols};
}

// ---- graph -----------------------------------------------------------------

namespace {
thread_local bool grad_mode = true;
}

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }
bool grad_enabled() { return grad_mode; }

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               BackwardFn backward_fn) {
    auto node = detail::new_node(std::move(shape), std::move(values));
    const bool needs = grad_mode && std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
    node->leaf = false;
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const auto& t : inputs) node->parents.push_back(TensorAccess::ptr(t));
        node->backward = std::move(backward_fn);
    }
    return TensorAccess::wrap(std::move(node));
}

void backward(const Tensor& output) {
    auto& root = TensorAccess::node(output);
    if (root.value.size() != 1) {
        throw ContractError("backward() needs a single-element output, got shape " +
                            shape_to_string(root.shape));
    }
    if (!root.requires_grad) return;

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->leaf || n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    }
    root.grad[0] += 1.0;

    std::vector<std::vector<double>*> sinks;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward) continue;
        sinks.clear();
        for (const auto& p : n->parents) sinks.push_back(p->requires_grad ? &p->grad : nullptr);
        n->backward(n->grad, sinks);
    }
}

// ---- operations ------------------------------------------------------------

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(b.shape()) + " differ");
    }
}

void require_axis(const Tensor& x, std::size_t axis, const char* op) {
    if (axis >= x.rank()) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_to_string(x.shape()));
    }
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.extent = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

Tensor matmul_impl(const Tensor& x, const Tensor& W, const Tensor* b, const char* op) {
    if (x.rank() == 0 || W.rank() != 2 || x.shape().back() != W.extent(0)) {
        throw DimensionError(std::string(op) + ": input " + shape_to_string(x.shape()) +
                             " incompatible with weight " + shape_to_string(W.shape()));
    }
    const std::size_t d_in = W.extent(0), d_out = W.extent(1);
    if (b && (b->rank() != 1 || b->extent(0) != d_out)) {
        throw DimensionError(std::string(op) + ": bias " + shape_to_string(b->shape()) +
                             " incompatible with weight " + shape_to_string(W.shape()));
    }
    const auto rows = static_cast<Eigen::Index>(x.size() / d_in);
    Shape out_shape = x.shape();
    out_shape.back() = d_out;
    std::vector<double> out(static_cast<std::size_t>(rows) * d_out);
    MutMap o(out.data(), rows, static_cast<Eigen::Index>(d_out));
    ConstMap xm(x.values().data(), rows, static_cast<Eigen::Index>(d_in));
    ConstMap wm(W.values().data(), static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(d_out));
    o.noalias() = xm * wm;
    if (b) {
        Eigen::Map<const Eigen::RowVectorXd> bv(b->values().data(), static_cast<Eigen::Index>(d_out));
        o.rowwise() += bv;
    }

    std::vector<Tensor> inputs{x, W};
    if (b) inputs.push_back(*b);
    return make_op(
        std::move(out_shape), std::move(out), inputs,
        [x, W, rows, d_in, d_out](std::span<const double> g, std::span<std::vector<double>*> sinks) {
            const auto di = static_cast<Eigen::Index>(d_in), dout = static_cast<Eigen::Index>(d_out);
            ConstMap gm(g.data(), rows, dout);
            if (sinks[0]) {
                MutMap dx(sinks[0]->data(), rows, di);
                dx.noalias() += gm * ConstMap(W.values().data(), di, dout).transpose();
            }
            if (sinks[1]) {
                MutMap dw(sinks[1]->data(), di, dout);
                dw.noalias() += ConstMap(x.values().data(), rows, di).transpose() * gm;
            }
            if (sinks.size() > 2 && sinks[2]) {
                Eigen::Map<Eigen::RowVectorXd> db(sinks[2]->data(), dout);
                db += gm.colwise().sum();
            }
        });
}

template <typename Fwd, typename Bwd>
Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, op);
    const auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return make_op(a.shape(), std::move(out), {a, b},
                   [a, b, bwd](std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       const auto av = a.values(), bv = b.values();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           const auto [da, db] = bwd(av[i], bv[i]);
                           if (sinks[0]) (*sinks[0])[i] += g[i] * da;
                           if (sinks[1]) (*sinks[1])[i] += g[i] * db;
                       }
                   });
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
    return matmul_impl(x, W, &b, "affine");
}

Tensor linear(const Tensor& x, const Tensor& W) { return matmul_impl(x, W, nullptr, "linear"); }

Tensor relu(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return make_op(x.shape(), std::move(out), {x},
                   [x](std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       const auto xv = x.values();
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           if (xv[i] > 0.0) dx[i] += g[i];
                       }
                   });
}

Tensor reduce_max(const Tensor& x, std::size_t axis) {
    require_axis(x, axis, "reduce_max");
    const auto [outer, k, inner] = split_at(x.shape(), axis);
    if (k == 0) throw DimensionError("reduce_max over an empty axis");
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));

    const auto xv = x.values();
    std::vector<double> out(outer * inner);
    std::vector<std::size_t> arg(outer * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t best = o * k * inner + i;
            for (std::size_t j = 1; j < k; ++j) {
                const std::size_t idx = (o * k + j) * inner + i;
                if (xv[idx] > xv[best]) best = idx;  // strict: first index wins ties
            }
            out[o * inner + i] = xv[best];
            arg[o * inner + i] = best;
        }
    }
    return make_op(std::move(out_shape), std::move(out), {x},
                   [arg = std::move(arg)](std::span<const double> g,
                                          std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[arg[i]] += g[i];
                   });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    const Shape& ref = parts[0].shape();
    require_axis(parts[0], axis, "concat");
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
        if (!ok) {
            throw DimensionError("concat along axis " + std::to_string(axis) + ": shapes " +
                                 shape_to_string(ref) + " and " + shape_to_string(s) +
                                 " are incompatible");
        }
        total += s[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total;
    const auto [outer, unused, inner] = split_at(ref, axis);
    (void)unused;

    std::vector<double> out(outer * total * inner);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t e = p.shape()[axis];
        const auto pv = p.values();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * e * inner), e * inner,
                        out.begin() + static_cast<std::ptrdiff_t>((o * total + off) * inner));
        }
        offsets.push_back(off);
        off += e;
    }
    std::vector<std::size_t> extents;
    for (const auto& p : parts) extents.push_back(p.shape()[axis]);

    return make_op(std::move(out_shape), std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                   [outer = outer, inner = inner, total, offsets, extents](
                       std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       for (std::size_t p = 0; p < sinks.size(); ++p) {
                           if (!sinks[p]) continue;
                           auto& d = *sinks[p];
                           const std::size_t e = extents[p];
                           for (std::size_t o = 0; o < outer; ++o) {
                               const double* src = g.data() + (o * total + offsets[p]) * inner;
                               double* dst = d.data() + o * e * inner;
                               for (std::size_t i = 0; i < e * inner; ++i) dst[i] += src[i];
                           }
                       }
                   });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape " + shape_to_string(x.shape()) + " to " +
                             shape_to_string(shape) + " changes the element count");
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_op(std::move(shape), std::move(out), {x},
                   [](std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                   });
}

Tensor tile(const Tensor& x, std::size_t axis, std::size_t count) {
    require_axis(x, axis, "tile");
    if (count == 0) throw DimensionError("tile count must be positive");
    const auto [outer, e, inner] = split_at(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape[axis] = e * count;
    const auto xv = x.values();
    std::vector<double> out(x.size() * count);
    for (std::size_t o = 0; o < outer; ++o) {
        const auto src = xv.begin() + static_cast<std::ptrdiff_t>(o * e * inner);
        for (std::size_t c = 0; c < count; ++c) {
            std::copy_n(src, e * inner,
                        out.begin() + static_cast<std::ptrdiff_t>(((o * count + c) * e) * inner));
        }
    }
    return make_op(std::move(out_shape), std::move(out), {x},
                   [outer = outer, e = e, inner = inner, count](std::span<const double> g,
                                                                std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t o = 0; o < outer; ++o) {
                           for (std::size_t c = 0; c < count; ++c) {
                               const double* src = g.data() + ((o * count + c) * e) * inner;
                               double* dst = dx.data() + o * e * inner;
                               for (std::size_t i = 0; i < e * inner; ++i) dst[i] += src[i];
                           }
                       }
                   });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    require_axis(x, axis, "slice");
    const auto [outer, e, inner] = split_at(x.shape(), axis);
    if (begin >= end || end > e) {
        throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") out of range for axis of extent " + std::to_string(e));
    }
    const std::size_t len = end - begin;
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    const auto xv = x.values();
    std::vector<double> out(outer * len * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * e + begin) * inner), len * inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * len * inner));
    }
    return make_op(std::move(out_shape), std::move(out), {x},
                   [outer = outer, e = e, inner = inner, begin, len](
                       std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t o = 0; o < outer; ++o) {
                           const double* src = g.data() + o * len * inner;
                           double* dst = dx.data() + (o * e + begin) * inner;
                           for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                       }
                   });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    if (x.rank() != 2) {
        throw DimensionError("gather_rows needs a rank-2 tensor, got " + shape_to_string(x.shape()));
    }
    const std::size_t n = x.extent(0), d = x.extent(1);
    std::vector<double> out(rows.size() * d);
    const auto xv = x.values();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= n) {
            throw DimensionError("gather_rows index " + std::to_string(rows[r]) +
                                 " out of range for " + std::to_string(n) + " rows");
        }
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                    out.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    return make_op({rows.size(), d}, std::move(out), {x},
                   [idx = std::vector<std::size_t>(rows.begin(), rows.end()), d](
                       std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                           for (std::size_t c = 0; c < d; ++c) dx[idx[r] * d + c] += g[r * d + c];
                       }
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y) { return std::pair{y, x}; });
}

Tensor scale(const Tensor& x, double factor) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
    return make_op(x.shape(), std::move(out), {x},
                   [factor](std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
                   });
}

Tensor add_scalar(const Tensor& x, double offset) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + offset;
    return make_op(x.shape(), std::move(out), {x},
                   [](std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                   });
}

Tensor square(const Tensor& x) { return mul(x, x); }

Tensor sum(const Tensor& x) {
    const auto xv = x.values();
    const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
    return make_op({}, {s}, {x}, [](std::span<const double> g, std::span<std::vector<double>*> sinks) {
        for (double& v : *sinks[0]) v += g[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw DimensionError("mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace crn
