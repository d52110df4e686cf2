#include "tabssl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tabssl {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::InvalidAxis: return "InvalidAxis";
        case ErrorCode::NotScalar: return "NotScalar";
        case ErrorCode::DetachedLoss: return "DetachedLoss";
        case ErrorCode::InvalidDims: return "InvalidDims";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::InvalidTemperature: return "InvalidTemperature";
        case ErrorCode::InvalidWeights: return "InvalidWeights";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::MissingGradient: return "MissingGradient";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::UnknownOptimizer: return "UnknownOptimizer";
        case ErrorCode::InvalidLearningRate: return "InvalidLearningRate";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::RaggedRows: return "RaggedRows";
        case ErrorCode::EmptyTable: return "EmptyTable";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::MissingLabel: return "MissingLabel";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::InvalidK: return "InvalidK";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::NoLabels: return "NoLabels";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape* tape) : previous_(g_active_tape) { g_active_tape = tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::record(OpKind kind, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
    nodes_.push_back(Node{kind, std::move(inputs), output, std::move(fn)});
}

bool Tape::contains_output(const Tensor& t) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const Node& n) { return n.output.same_storage(t); });
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "shape " + shape_to_string(shape) + " needs " +
                                                  std::to_string(shape_numel(shape)) + " values, got " +
                                                  std::to_string(values.size()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "tensor constructed with non-finite value");
    }
    impl_ = std::make_shared<detail::TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->verified_finite = true;
    impl_->requires_grad = requires_grad;
    if (requires_grad) {
        if (Tape* tape = active_tape()) tape->record(OpKind::Leaf, {}, *this, nullptr);
    }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

detail::TensorImpl& Tensor::checked() const {
    if (!impl_) throw Error(ErrorCode::ShapeMismatch, "use of an undefined tensor");
    return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw Error(ErrorCode::InvalidAxis, "axis " + std::to_string(axis) + " out of range");
    return s[axis];
}

std::span<const double> Tensor::values() const { return checked().values; }
std::span<double> Tensor::mutable_values() {
    auto& impl = checked();
    impl.verified_finite = false;
    return impl.values;
}

double Tensor::item() const {
    const auto& impl = checked();
    if (impl.values.size() != 1) throw Error(ErrorCode::NotScalar, "item() on tensor of shape " + shape_to_string(impl.shape));
    return impl.values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    const auto& impl = checked();
    if (impl.shape.size() != 2 || row >= impl.shape[0] || col >= impl.shape[1]) {
        throw Error(ErrorCode::ShapeMismatch, "at() index outside " + shape_to_string(impl.shape));
    }
    return impl.values[row * impl.shape[1] + col];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
void Tensor::set_requires_grad(bool flag) { checked().requires_grad = flag; }
bool Tensor::has_grad() const { return checked().has_grad; }

std::span<const double> Tensor::grad() const {
    const auto& impl = checked();
    if (!impl.has_grad) return {};
    return impl.grad;
}

std::span<double> Tensor::mutable_grad() {
    auto& impl = checked();
    if (!impl.has_grad) {
        impl.grad.assign(impl.values.size(), 0.0);
        impl.has_grad = true;
    }
    return impl.grad;
}

void Tensor::clear_grad() {
    auto& impl = checked();
    impl.grad.clear();
    impl.has_grad = false;
}

void Tensor::accumulate_grad(std::span<const double> delta) {
    auto g = mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

Tensor Tensor::clone() const {
    const auto& src = checked();
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = src.shape;
    impl->values = src.values;
    impl->verified_finite = src.verified_finite;
    impl->requires_grad = src.requires_grad;
    impl->grad = src.grad;
    impl->has_grad = src.has_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
    const auto& src = checked();
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = src.shape;
    impl->values = src.values;
    impl->verified_finite = src.verified_finite;
    return Tensor(std::move(impl));
}

}  // namespace tabssl
