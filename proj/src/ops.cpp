#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "tabssl/tensor.hpp"

namespace tabssl {

namespace {

using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;

void require_finite(std::span<const double> values, const char* where) {
    // Exponent all ones means Inf or NaN; the branch-free OR keeps the loop vectorizable.
    constexpr std::uint64_t kExponent = 0x7ff0000000000000ULL;
    std::uint64_t bad = 0;
    for (double v : values) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExponent) == kExponent);
    if (bad) throw Error(ErrorCode::NonFiniteValue, std::string(where) + " produced or received a non-finite value");
}

struct Output {
    Tensor tensor;
    Tape* tape;  // non-null when the op must be recorded
};

Output make_output(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
                   const char* where) {
    require_finite(values, where);
    Tape* tape = active_tape();
    bool track = false;
    if (tape) {
        for (const Tensor* t : inputs) track = track || t->requires_grad();
    }
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->verified_finite = true;
    impl->requires_grad = track;
    impl->producer = track ? tape : nullptr;
    return {Tensor(std::move(impl)), track ? tape : nullptr};
}

void check_inputs(std::initializer_list<const Tensor*> inputs, const char* where) {
    for (const Tensor* t : inputs) {
        if (t->impl()->verified_finite) continue;
        require_finite(t->values(), where);
        t->impl()->verified_finite = true;
    }
}

std::vector<double>& grad_of(const ImplPtr& p) {
    if (!p->has_grad) {
        p->grad.assign(p->values.size(), 0.0);
        p->has_grad = true;
    }
    return p->grad;
}

void require_rank2(const Tensor& x, const char* where) {
    if (x.rank() != 2) throw Error(ErrorCode::ShapeMismatch, std::string(where) + " needs a rank-2 tensor, got " + shape_to_string(x.shape()));
}

// Cloned per ISA; the loops are written so the compiler can vectorize the
// innermost dimension.
#define TABSSL_KERNEL __attribute__((target_clones("avx512f", "avx2", "default")))

// C[m,n] += A[m,k] * B[k,n], all row-major.
TABSSL_KERNEL void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
TABSSL_KERNEL void gemm_tn_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<double> transposed(std::span<const double> x, std::size_t rows, std::size_t cols) {
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
    return out;
}

enum class Broadcast { Same, Scalar, Row };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::Same;
    if (b.numel() == 1 && b.rank() <= 1) return Broadcast::Scalar;
    if (b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.shape().back()) return Broadcast::Row;
    throw Error(ErrorCode::ShapeMismatch,
                "cannot combine " + shape_to_string(a.shape()) + " with " + shape_to_string(b.shape()));
}

// Splits a shape around `axis` into outer * len * inner.
struct AxisLayout {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
    AxisLayout l;
    for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
    l.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
    return l;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "matmul " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
    }
    check_inputs({&a, &b}, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    gemm_accumulate(a.values().data(), b.values().data(), out.data(), m, k, n);
    auto [result, tape] = make_output({m, n}, std::move(out), {&a, &b}, "matmul");
    if (tape) {
        ImplPtr ai = a.impl(), bi = b.impl();
        tape->record(OpKind::MatMul, {a, b}, result, [ai, bi, m, k, n](std::span<const double> g) {
            if (ai->requires_grad) {
                // dA = dC * B^T, via a transposed copy of B so the inner loop stays contiguous.
                const auto bt = transposed(bi->values, k, n);
                gemm_accumulate(g.data(), bt.data(), grad_of(ai).data(), m, n, k);
            }
            if (bi->requires_grad) gemm_tn_accumulate(ai->values.data(), g.data(), grad_of(bi).data(), m, k, n);
        });
    }
    return result;
}

Tensor transpose(const Tensor& x) {
    require_rank2(x, "transpose");
    const std::size_t r = x.dim(0), c = x.dim(1);
    auto [result, tape] = make_output({c, r}, transposed(x.values(), r, c), {&x}, "transpose");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::Transpose, {x}, result, [xi, r, c](std::span<const double> g) {
            auto& gx = grad_of(xi);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
        });
    }
    return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw Error(ErrorCode::ShapeMismatch, "reshape " + shape_to_string(x.shape()) + " -> " + shape_to_string(shape));
    }
    std::vector<double> values(x.values().begin(), x.values().end());
    auto [result, tape] = make_output(std::move(shape), std::move(values), {&x}, "reshape");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::Reshape, {x}, result, [xi](std::span<const double> g) {
            auto& gx = grad_of(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        });
    }
    return result;
}

Tensor map_unary(UnaryKind kind, const Tensor& x) {
    check_inputs({&x}, "map_unary");
    const auto in = x.values();
    std::vector<double> out(in.size());
    switch (kind) {
        case UnaryKind::Exp:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
            break;
        case UnaryKind::Log:
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (in[i] <= 0.0) throw Error(ErrorCode::DomainError, "log of non-positive value " + std::to_string(in[i]));
                out[i] = std::log(in[i]);
            }
            break;
        case UnaryKind::Tanh:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
            break;
        case UnaryKind::Relu:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        case UnaryKind::Neg:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = -in[i];
            break;
    }
    auto [result, tape] = make_output(x.shape(), std::move(out), {&x}, "map_unary");
    if (tape) {
        ImplPtr xi = x.impl();
        ImplPtr yi = result.impl();
        tape->record(OpKind::Unary, {x}, result, [kind, xi, yi](std::span<const double> g) {
            auto& gx = grad_of(xi);
            const auto& xv = xi->values;
            switch (kind) {
                case UnaryKind::Exp: {
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * yi->values[i];
                    break;
                }
                case UnaryKind::Log:
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] / xv[i];
                    break;
                case UnaryKind::Tanh: {
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (1.0 - yi->values[i] * yi->values[i]);
                    break;
                }
                case UnaryKind::Relu:
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
                    break;
                case UnaryKind::Neg:
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= g[i];
                    break;
            }
        });
    }
    return result;
}

Tensor exp(const Tensor& x) { return map_unary(UnaryKind::Exp, x); }
Tensor log(const Tensor& x) { return map_unary(UnaryKind::Log, x); }
Tensor tanh(const Tensor& x) { return map_unary(UnaryKind::Tanh, x); }
Tensor relu(const Tensor& x) { return map_unary(UnaryKind::Relu, x); }
Tensor neg(const Tensor& x) { return map_unary(UnaryKind::Neg, x); }

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw Error(ErrorCode::DomainError, "clamp bounds out of order");
    check_inputs({&x}, "clamp");
    const auto in = x.values();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::min(hi, std::max(lo, in[i]));
    auto [result, tape] = make_output(x.shape(), std::move(out), {&x}, "clamp");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::Clamp, {x}, result, [xi, lo, hi](std::span<const double> g) {
            auto& gx = grad_of(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const double v = xi->values[i];
                if (v >= lo && v <= hi) gx[i] += g[i];
            }
        });
    }
    return result;
}

Tensor combine_binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
    const Broadcast mode = broadcast_mode(a, b);
    check_inputs({&a, &b}, "combine_binary");
    const auto av = a.values();
    const auto bv = b.values();
    const std::size_t n = av.size();
    const std::size_t row = mode == Broadcast::Row ? bv.size() : 1;
    auto bidx = [mode, row](std::size_t i) -> std::size_t {
        switch (mode) {
            case Broadcast::Same: return i;
            case Broadcast::Scalar: return 0;
            case Broadcast::Row: return i % row;
        }
        return i;
    };
    if (kind == BinaryKind::Div) {
        for (double v : bv) {
            if (v == 0.0) throw Error(ErrorCode::DivisionByZero, "division by a zero element");
        }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[i], y = bv[bidx(i)];
        switch (kind) {
            case BinaryKind::Add: out[i] = x + y; break;
            case BinaryKind::Sub: out[i] = x - y; break;
            case BinaryKind::Mul: out[i] = x * y; break;
            case BinaryKind::Div: out[i] = x / y; break;
        }
    }
    auto [result, tape] = make_output(a.shape(), std::move(out), {&a, &b}, "combine_binary");
    if (tape) {
        ImplPtr ai = a.impl(), bi = b.impl();
        tape->record(OpKind::Binary, {a, b}, result, [kind, ai, bi, bidx, n](std::span<const double> g) {
            const auto& x = ai->values;
            const auto& y = bi->values;
            if (ai->requires_grad) {
                auto& ga = grad_of(ai);
                for (std::size_t i = 0; i < n; ++i) {
                    switch (kind) {
                        case BinaryKind::Add:
                        case BinaryKind::Sub: ga[i] += g[i]; break;
                        case BinaryKind::Mul: ga[i] += g[i] * y[bidx(i)]; break;
                        case BinaryKind::Div: ga[i] += g[i] / y[bidx(i)]; break;
                    }
                }
            }
            if (bi->requires_grad) {
                auto& gb = grad_of(bi);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j = bidx(i);
                    switch (kind) {
                        case BinaryKind::Add: gb[j] += g[i]; break;
                        case BinaryKind::Sub: gb[j] -= g[i]; break;
                        case BinaryKind::Mul: gb[j] += g[i] * x[i]; break;
                        case BinaryKind::Div: gb[j] -= g[i] * x[i] / (y[j] * y[j]); break;
                    }
                }
            }
        });
    }
    return result;
}

Tensor add(const Tensor& a, const Tensor& b) { return combine_binary(BinaryKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return combine_binary(BinaryKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return combine_binary(BinaryKind::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return combine_binary(BinaryKind::Div, a, b); }

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }

Tensor reduce(ReduceKind kind, const Tensor& x, std::optional<std::size_t> axis) {
    if (axis && *axis >= x.rank()) {
        throw Error(ErrorCode::InvalidAxis, "axis " + std::to_string(*axis) + " for rank " + std::to_string(x.rank()));
    }
    check_inputs({&x}, "reduce");
    if (x.numel() == 0) throw Error(ErrorCode::ShapeMismatch, "reduction over an empty tensor");

    // A full reduction is the single-axis case over a flattened view.
    Shape out_shape;
    AxisLayout l;
    if (axis) {
        l = axis_layout(x.shape(), *axis);
        out_shape = x.shape();
        out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
    } else {
        l.len = x.numel();
    }
    if (l.len == 0) throw Error(ErrorCode::ShapeMismatch, "reduction over an empty axis");

    const auto in = x.values();
    std::vector<double> out(l.outer * l.inner);
    std::vector<std::size_t> argmax;
    if (kind == ReduceKind::Max) argmax.resize(out.size());
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t i = 0; i < l.inner; ++i) {
            const std::size_t base = o * l.len * l.inner + i;
            const std::size_t slot = o * l.inner + i;
            if (kind == ReduceKind::Max) {
                std::size_t best = base;
                for (std::size_t k = 1; k < l.len; ++k) {
                    const std::size_t idx = base + k * l.inner;
                    if (in[idx] > in[best]) best = idx;
                }
                out[slot] = in[best];
                argmax[slot] = best;
            } else {
                double acc = 0.0;
                for (std::size_t k = 0; k < l.len; ++k) acc += in[base + k * l.inner];
                out[slot] = kind == ReduceKind::Mean ? acc / static_cast<double>(l.len) : acc;
            }
        }
    }
    auto [result, tape] = make_output(std::move(out_shape), std::move(out), {&x}, "reduce");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::Reduce, {x}, result, [kind, xi, l, argmax = std::move(argmax)](std::span<const double> g) {
            auto& gx = grad_of(xi);
            const double scale = kind == ReduceKind::Mean ? 1.0 / static_cast<double>(l.len) : 1.0;
            for (std::size_t o = 0; o < l.outer; ++o) {
                for (std::size_t i = 0; i < l.inner; ++i) {
                    const std::size_t slot = o * l.inner + i;
                    if (kind == ReduceKind::Max) {
                        gx[argmax[slot]] += g[slot];
                        continue;
                    }
                    const std::size_t base = o * l.len * l.inner + i;
                    for (std::size_t k = 0; k < l.len; ++k) gx[base + k * l.inner] += g[slot] * scale;
                }
            }
        });
    }
    return result;
}

Tensor sum(const Tensor& x, std::optional<std::size_t> axis) { return reduce(ReduceKind::Sum, x, axis); }
Tensor mean(const Tensor& x, std::optional<std::size_t> axis) { return reduce(ReduceKind::Mean, x, axis); }
Tensor max(const Tensor& x, std::optional<std::size_t> axis) { return reduce(ReduceKind::Max, x, axis); }

Tensor log_sum_exp(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw Error(ErrorCode::InvalidAxis, "axis " + std::to_string(axis) + " for rank " + std::to_string(x.rank()));
    }
    check_inputs({&x}, "log_sum_exp");
    const AxisLayout l = axis_layout(x.shape(), axis);
    if (l.len == 0) throw Error(ErrorCode::ShapeMismatch, "log_sum_exp over an empty axis");
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));

    const auto in = x.values();
    std::vector<double> out(l.outer * l.inner);
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t i = 0; i < l.inner; ++i) {
            const std::size_t base = o * l.len * l.inner + i;
            double m = in[base];
            for (std::size_t k = 1; k < l.len; ++k) m = std::max(m, in[base + k * l.inner]);
            double acc = 0.0;
            for (std::size_t k = 0; k < l.len; ++k) acc += std::exp(in[base + k * l.inner] - m);
            out[o * l.inner + i] = m + std::log(acc);
        }
    }
    auto [result, tape] = make_output(std::move(out_shape), std::move(out), {&x}, "log_sum_exp");
    if (tape) {
        ImplPtr xi = x.impl();
        ImplPtr yi = result.impl();
        tape->record(OpKind::LogSumExp, {x}, result, [xi, yi, l](std::span<const double> g) {
            const auto& y = yi;
            auto& gx = grad_of(xi);
            const auto& xv = xi->values;
            for (std::size_t o = 0; o < l.outer; ++o) {
                for (std::size_t i = 0; i < l.inner; ++i) {
                    const std::size_t slot = o * l.inner + i;
                    const std::size_t base = o * l.len * l.inner + i;
                    for (std::size_t k = 0; k < l.len; ++k) {
                        const std::size_t idx = base + k * l.inner;
                        gx[idx] += g[slot] * std::exp(xv[idx] - y->values[slot]);
                    }
                }
            }
        });
    }
    return result;
}

Tensor normalize_rows(const Tensor& x, double norm_floor) {
    require_rank2(x, "normalize_rows");
    check_inputs({&x}, "normalize_rows");
    const std::size_t n = x.dim(0), d = x.dim(1);
    const auto in = x.values();
    std::vector<double> out(in.size());
    std::vector<double> norms(n);
    for (std::size_t r = 0; r < n; ++r) {
        double ss = 0.0;
        for (std::size_t c = 0; c < d; ++c) ss += in[r * d + c] * in[r * d + c];
        norms[r] = std::sqrt(ss);
        const double denom = std::max(norms[r], norm_floor);
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] = in[r * d + c] / denom;
    }
    auto [result, tape] = make_output(x.shape(), std::move(out), {&x}, "normalize_rows");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::NormalizeRows, {x}, result,
                     [xi, norms = std::move(norms), n, d, norm_floor](std::span<const double> g) {
                         auto& gx = grad_of(xi);
                         const auto& xv = xi->values;
                         for (std::size_t r = 0; r < n; ++r) {
                             const double* xr = xv.data() + r * d;
                             const double* gr = g.data() + r * d;
                             double* out_r = gx.data() + r * d;
                             if (norms[r] <= norm_floor) {
                                 // Floored norm is a constant divisor.
                                 for (std::size_t c = 0; c < d; ++c) out_r[c] += gr[c] / norm_floor;
                                 continue;
                             }
                             const double nr = norms[r];
                             double dot = 0.0;
                             for (std::size_t c = 0; c < d; ++c) dot += gr[c] * xr[c];
                             const double k = dot / (nr * nr * nr);
                             for (std::size_t c = 0; c < d; ++c) out_r[c] += gr[c] / nr - xr[c] * k;
                         }
                     });
    }
    return result;
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
    require_rank2(top, "concat_rows");
    require_rank2(bottom, "concat_rows");
    if (top.dim(1) != bottom.dim(1)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "concat_rows " + shape_to_string(top.shape()) + " with " + shape_to_string(bottom.shape()));
    }
    check_inputs({&top, &bottom}, "concat_rows");
    const std::size_t n1 = top.numel();
    std::vector<double> out;
    out.reserve(n1 + bottom.numel());
    out.insert(out.end(), top.values().begin(), top.values().end());
    out.insert(out.end(), bottom.values().begin(), bottom.values().end());
    auto [result, tape] =
        make_output({top.dim(0) + bottom.dim(0), top.dim(1)}, std::move(out), {&top, &bottom}, "concat_rows");
    if (tape) {
        ImplPtr ti = top.impl(), bi = bottom.impl();
        tape->record(OpKind::ConcatRows, {top, bottom}, result, [ti, bi, n1](std::span<const double> g) {
            if (ti->requires_grad) {
                auto& gt = grad_of(ti);
                for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
            }
            if (bi->requires_grad) {
                auto& gb = grad_of(bi);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[n1 + i];
            }
        });
    }
    return result;
}

Tensor gather_columns(const Tensor& x, const std::vector<std::vector<std::size_t>>& columns) {
    require_rank2(x, "gather_columns");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (columns.size() != rows) throw Error(ErrorCode::ShapeMismatch, "gather_columns needs one index list per row");
    const std::size_t k = rows ? columns[0].size() : 0;
    for (const auto& idx : columns) {
        if (idx.size() != k) throw Error(ErrorCode::ShapeMismatch, "gather_columns index lists differ in length");
        for (std::size_t c : idx) {
            if (c >= cols) throw Error(ErrorCode::ShapeMismatch, "gather_columns index out of range");
        }
    }
    check_inputs({&x}, "gather_columns");
    const auto in = x.values();
    std::vector<double> out(rows * k);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j) out[r * k + j] = in[r * cols + columns[r][j]];
    auto [result, tape] = make_output({rows, k}, std::move(out), {&x}, "gather_columns");
    if (tape) {
        ImplPtr xi = x.impl();
        tape->record(OpKind::GatherColumns, {x}, result, [xi, columns, rows, cols, k](std::span<const double> g) {
            auto& gx = grad_of(xi);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < k; ++j) gx[r * cols + columns[r][j]] += g[r * k + j];
        });
    }
    return result;
}

Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows) {
    require_rank2(x, "take_rows");
    const std::size_t d = x.dim(1);
    const auto in = x.values();
    std::vector<double> out;
    out.reserve(rows.size() * d);
    for (std::size_t r : rows) {
        if (r >= x.dim(0)) throw Error(ErrorCode::ShapeMismatch, "take_rows index out of range");
        out.insert(out.end(), in.begin() + static_cast<std::ptrdiff_t>(r * d),
                   in.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
    }
    return Tensor(Shape{rows.size(), d}, std::move(out));
}

void backward(const Tape& tape, const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw Error(ErrorCode::NotScalar, "backward needs a single-element loss, got " +
                                              (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) throw Error(ErrorCode::DetachedLoss, "loss does not require grad");

    const auto& nodes = tape.nodes();
    std::size_t last = nodes.size();
    for (std::size_t i = nodes.size(); i-- > 0;) {
        if (nodes[i].output.same_storage(loss)) {
            last = i;
            break;
        }
    }
    if (last == nodes.size()) throw Error(ErrorCode::DetachedLoss, "loss was not recorded on this tape");

    Tensor seed = loss;
    seed.mutable_grad()[0] = 1.0;
    for (std::size_t i = last + 1; i-- > 0;) {
        const auto& node = nodes[i];
        if (!node.backward || !node.output.has_grad()) continue;
        node.backward(node.output.grad());
    }
}

}  // namespace tabssl
