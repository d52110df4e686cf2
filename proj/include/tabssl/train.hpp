#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabssl/config.hpp"
#include "tabssl/nn.hpp"

namespace tabssl {

struct LossCurveEntry {
    std::size_t step = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double nce = 0.0;  // components of the training batch loss
    double recon_nll = 0.0;
    double kl = 0.0;
};

struct LossCurve {
    std::vector<LossCurveEntry> entries;

    // Header `step,train_loss,val_loss,nce,recon_nll,kl`.
    std::string to_csv() const;
};

struct PretrainResult {
    ModelBundle model;
    LossCurve curve;
};

// Initial weights for a run: same for pretraining and the untrained baseline.
ModelBundle initial_model(const ExperimentConfig& config, std::size_t input_dim);

/// Minimizes lambda1 * InfoNCE + lambda2 * (-ELBO) over minibatches of
/// train_features, honouring the ablation switches. Logs entries at step
/// 1, every log_interval steps and the last step; val loss is computed on
/// val_features with the parameters of that step, before the update.
/// Throws BatchTooSmall, NonFiniteLoss (message names the step).
PretrainResult pretrain(const ExperimentConfig& config, const Tensor& train_features, const Tensor& val_features);

// Objective on a batch without recording anything.
LossBreakdown evaluate_objective(const ModelBundle& model, const ExperimentConfig& config, const Tensor& x, std::uint64_t substream_seed);

// Trunk output with no tape.
Tensor extract_features(const ModelBundle& model, const Tensor& features);

struct ProbeSettings {
    std::size_t steps = 500;
    double lr = 0.05;
    std::string optimizer = "adam";
    SmoteConfig smote;
    std::uint64_t seed = 0;
};

ProbeSettings probe_settings(const ExperimentConfig& config);

/// Softmax regression on standardized frozen features.
struct ProbeClassifier {
    Tensor weights;  // [d, classes]
    Tensor bias;     // [classes]
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;

    std::size_t n_classes() const { return bias.numel(); }
    Tensor logits(const Tensor& features) const;
    std::vector<int> predict(const Tensor& features) const;
};

/// Labels are class indices in [0, n_classes). Full-batch cross-entropy
/// training; SMOTE is applied to the training rows when enabled.
/// Throws SingleClass, LengthMismatch.
ProbeClassifier linear_probe(const Tensor& features, const std::vector<int>& labels, std::size_t n_classes, const ProbeSettings& settings);

struct MetricsReport {
    std::vector<int> classes;                        // sorted union of observed classes
    std::vector<std::vector<std::size_t>> confusion;  // rows true, cols predicted
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

// Throws LengthMismatch.
MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace tabssl
