#pragma once

// Minimal reverse-mode differentiable tensor.
//
// A Tensor is a cheap handle to a graph node. Operations create new nodes
// that remember their inputs only when at least one input requires a
// gradient, so pure inference never retains a graph. Leaves created with
// Tensor::parameter() accumulate gradients across backward() calls until
// zero_grad() is called; intermediate nodes are reset on every pass.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace crn {

using Shape = std::vector<std::size_t>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);
    // Trainable leaf; requires_grad() is true.
    static Tensor parameter(Shape shape, std::vector<double> values);
    // Wraps an N x d row-major Eigen matrix as a constant.
    static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const;
    std::uint64_t id() const;

    std::span<const double> values() const;
    // In-place access for optimizers and finite-difference probes.
    std::span<double> mutable_values();
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();
    void clear_grad();

    // Same values, cut from the graph.
    Tensor detach() const;

    // Rank-2 view: rows x cols. Rank-1 tensors are viewed as one row.
    Eigen::Map<const RowMatrix> matrix() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend struct TensorAccess;
};

// Receives d(out)/d(out) and accumulates into each input gradient buffer.
// A buffer pointer is null when that input does not need a gradient.
using BackwardFn =
    std::function<void(std::span<const double> out_grad, std::span<std::vector<double>*> in_grads)>;

// Builds a node with caller-computed values. `backward` is only retained
// when some input requires a gradient.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               BackwardFn backward);

// While alive, operations on this thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Populates grad on every reachable node that requires one. `output` must
// hold exactly one element.
void backward(const Tensor& output);

// ---- differentiable operations -------------------------------------------

// out[..., j] = sum_i x[..., i] W[i, j] + b[j]
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);
// Matrix product without bias for x[..., d_in] and W[d_in, d_out].
Tensor linear(const Tensor& x, const Tensor& W);
Tensor relu(const Tensor& x);
Tensor reduce_max(const Tensor& x, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
// Repeats the whole tensor `count` times along `axis` (block tiling).
Tensor tile(const Tensor& x, std::size_t axis, std::size_t count);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
// Rows of a rank-2 tensor picked by index, repetition allowed.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

}  // namespace crn
