#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabssl/tensor.hpp"

namespace tabssl {

enum class OptimizerKind { Sgd, Adam, AdamW };

// Accepts "sgd", "adam", "adamw" (case-insensitive). Throws UnknownOptimizer.
OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);     // config spelling
std::string_view display_name(OptimizerKind kind);  // table label: SGD, Adam, AdamW

struct OptimizerSettings {
    std::string kind = "adamw";
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // only AdamW applies it
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::AdamW;
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t t = 0;
    // First and second moments, one buffer per parameter. Empty for SGD and
    // allocated (zeroed) on the first Adam/AdamW step.
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::vector<Shape> shapes;
};

/// Throws UnknownOptimizer, InvalidLearningRate (lr outside (0, 1)) and
/// InvalidValue for out-of-range betas, eps or weight decay.
OptimizerState make_optimizer(const OptimizerSettings& settings);

/// One update of every tensor in params from its grad slot, then clears
/// the grads. All grads are validated before anything is written, so a
/// failing step leaves parameters and state untouched.
/// Throws MissingGradient, NonFiniteGradient, ShapeMismatch (parameter set
/// changed between steps).
void step(OptimizerState& state, std::span<Tensor> params);

}  // namespace tabssl
