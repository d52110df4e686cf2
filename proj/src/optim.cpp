#include "tabssl/optim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace tabssl {

OptimizerKind parse_optimizer_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "sgd") return OptimizerKind::Sgd;
    if (lower == "adam") return OptimizerKind::Adam;
    if (lower == "adamw") return OptimizerKind::AdamW;
    throw Error(ErrorCode::UnknownOptimizer, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::AdamW: return "adamw";
    }
    return "?";
}

std::string_view display_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "SGD";
        case OptimizerKind::Adam: return "Adam";
        case OptimizerKind::AdamW: return "AdamW";
    }
    return "?";
}

OptimizerState make_optimizer(const OptimizerSettings& s) {
    OptimizerState state;
    state.kind = parse_optimizer_kind(s.kind);
    if (!(s.lr > 0.0 && s.lr < 1.0)) {
        throw Error(ErrorCode::InvalidLearningRate, "learning rate must lie in (0, 1), got " + std::to_string(s.lr));
    }
    if (!(s.beta1 >= 0.0 && s.beta1 < 1.0) || !(s.beta2 >= 0.0 && s.beta2 < 1.0)) {
        throw Error(ErrorCode::InvalidValue, "betas must lie in [0, 1)");
    }
    if (!(s.eps > 0.0) || !std::isfinite(s.eps)) throw Error(ErrorCode::InvalidValue, "eps must be positive");
    if (!(s.weight_decay >= 0.0) || !std::isfinite(s.weight_decay)) {
        throw Error(ErrorCode::InvalidValue, "weight_decay must be non-negative");
    }
    state.lr = s.lr;
    state.beta1 = s.beta1;
    state.beta2 = s.beta2;
    state.eps = s.eps;
    state.weight_decay = state.kind == OptimizerKind::AdamW ? s.weight_decay : 0.0;
    return state;
}

namespace {

void validate_grads(std::span<Tensor> params) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].has_grad()) {
            throw Error(ErrorCode::MissingGradient, "parameter " + std::to_string(p) + " has no gradient");
        }
        for (double g : params[p].grad()) {
            if (!std::isfinite(g)) {
                throw Error(ErrorCode::NonFiniteGradient, "parameter " + std::to_string(p) + " has a non-finite gradient");
            }
        }
    }
}

void ensure_moments(OptimizerState& state, std::span<Tensor> params) {
    if (state.shapes.empty() && state.t == 0) {
        for (const Tensor& p : params) {
            state.shapes.push_back(p.shape());
            state.m.emplace_back(p.numel(), 0.0);
            state.v.emplace_back(p.numel(), 0.0);
        }
        return;
    }
    if (state.shapes.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "optimizer was stepped with a different parameter count");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (state.shapes[p] != params[p].shape()) {
            throw Error(ErrorCode::ShapeMismatch, "parameter " + std::to_string(p) + " changed shape between steps");
        }
    }
}

}  // namespace

void step(OptimizerState& state, std::span<Tensor> params) {
    validate_grads(params);
    if (state.kind != OptimizerKind::Sgd) ensure_moments(state, params);
    ++state.t;

    if (state.kind == OptimizerKind::Sgd) {
        for (Tensor& p : params) {
            auto theta = p.mutable_values();
            auto g = p.grad();
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= state.lr * g[i];
            p.clear_grad();
        }
        return;
    }

    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const bool decay = state.kind == OptimizerKind::AdamW && state.weight_decay != 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto theta = params[p].mutable_values();
        auto g = params[p].grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
            if (decay) theta[i] -= state.lr * state.weight_decay * theta[i];
        }
        params[p].clear_grad();
    }
}

}  // namespace tabssl
