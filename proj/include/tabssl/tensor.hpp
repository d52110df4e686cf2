#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabssl/error.hpp"

namespace tabssl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tape;

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;
    bool has_grad = false;
    // Set once values are known finite; cleared by mutable_values().
    bool verified_finite = false;
    // Tape that recorded the op producing this tensor; null for leaves.
    const Tape* producer = nullptr;
};
}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage, the way
/// parameters are referenced from both a model and a tape. Use clone() for
/// an independent copy.
class Tensor {
  public:
    Tensor() = default;

    /// Validates shape/value agreement and finiteness. Registers the tensor
    /// as a leaf on the active tape when requires_grad is set.
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return values().size(); }

    std::span<const double> values() const;
    // Direct write access; used by optimizers between tapes.
    std::span<double> mutable_values();
    double item() const;
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void clear_grad();

    Tensor clone() const;
    // Same values, no gradient slot, not attached to any tape.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

    // Internal plumbing for op implementations.
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }
    void accumulate_grad(std::span<const double> delta);

  private:
    detail::TensorImpl& checked() const;
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Free-function spelling of the constructor.
inline Tensor new_tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
    return Tensor(std::move(shape), std::move(values), requires_grad);
}

enum class OpKind {
    Leaf,
    MatMul,
    Transpose,
    Reshape,
    Unary,
    Clamp,
    Binary,
    Reduce,
    LogSumExp,
    NormalizeRows,
    ConcatRows,
    GatherColumns,
};

/// Ordered record of differentiable operations for one forward pass.
///
/// Nodes are appended in execution order, so every node's inputs were
/// produced by an earlier node or are leaves. One tape per training step.
class Tape {
  public:
    using BackwardFn = std::function<void(std::span<const double> output_grad)>;

    struct Node {
        OpKind kind;
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(OpKind kind, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool contains_output(const Tensor& t) const;

  private:
    std::vector<Node> nodes_;
};

/// Installs a tape as the thread's active recorder for its lifetime.
/// Passing nullptr disables recording (inference mode).
class TapeScope {
  public:
    explicit TapeScope(Tape* tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

Tape* active_tape() noexcept;

// ---- operations -----------------------------------------------------------

enum class UnaryKind { Exp, Log, Tanh, Relu, Neg };
enum class BinaryKind { Add, Sub, Mul, Div };
enum class ReduceKind { Sum, Mean, Max };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor map_unary(UnaryKind kind, const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor neg(const Tensor& x);

// Gradient passes where lo <= x <= hi, zero elsewhere.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Elementwise a (op) b. Broadcasts only when b is a single element or a
/// rank-1 row matching a's last dimension; gradients for b are summed over
/// the broadcast rows.
Tensor combine_binary(BinaryKind kind, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double b);
Tensor operator-(const Tensor& a, double b);
Tensor operator*(const Tensor& a, double b);
Tensor operator/(const Tensor& a, double b);

/// Reduction over one axis (removed from the shape) or over everything
/// (rank-0 result). Max routes its gradient to the first maximal element.
Tensor reduce(ReduceKind kind, const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor sum(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor mean(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor max(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);

// m + log(sum(exp(x - m))) along axis, m the max along that axis.
Tensor log_sum_exp(const Tensor& x, std::size_t axis);

// Divides each row of a [n, d] tensor by max(||row||, floor).
Tensor normalize_rows(const Tensor& x, double norm_floor = 1e-12);

// Stacks [n1, d] and [n2, d] into [n1 + n2, d].
Tensor concat_rows(const Tensor& top, const Tensor& bottom);

// out[r][j] = x[r][columns[r][j]]; every row must pick the same count.
Tensor gather_columns(const Tensor& x, const std::vector<std::vector<std::size_t>>& columns);

// Copies selected rows of a rank-2 tensor; not differentiable.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Seeds d(loss)/d(loss) = 1 and walks the tape in reverse, accumulating
/// into the grad slot of every requires_grad tensor it reaches.
void backward(const Tape& tape, const Tensor& loss);

// ---- gradient checking ----------------------------------------------------

/// Worst per-coordinate relative error |a - n| / max(1e-8, |a| + |n|)
/// between backward gradients and central differences of f at x.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// Same check over several parameter tensors; f closes over them and is
/// re-evaluated with each coordinate perturbed in place.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps = 1e-5);

}  // namespace tabssl
