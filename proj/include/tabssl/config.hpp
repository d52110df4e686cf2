#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tabssl/data.hpp"
#include "tabssl/losses.hpp"
#include "tabssl/nn.hpp"
#include "tabssl/optim.hpp"

namespace tabssl {

struct DatasetConfig {
    std::string path;    // CSV; empty selects the built-in blobs generator
    std::string schema;  // optional sidecar
    std::string label;   // label column; overrides the schema's
    std::uint64_t synthetic_seed = 0;
    BlobsConfig synthetic;
};

struct TrainingConfig {
    std::size_t steps = 10000;
    std::size_t batch_size = 128;
    std::size_t log_interval = 100;
};

struct AblationConfig {
    bool disable_contrastive = false;
    bool disable_variational = false;
    bool disable_augmentation = false;
};

struct EvaluationConfig {
    std::size_t cv_folds = 0;  // 0: one train/test split; k >= 2: pooled out-of-fold predictions
    std::size_t probe_steps = 500;
    double probe_lr = 0.05;
    std::string probe_optimizer = "adam";
    double train_fraction = 0.8;
    double val_fraction = 0.1;  // share of the training portion held out for val loss
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::uint64_t seed = 0;
    ModelDims dims;  // input_dim is taken from the data
    LossWeights loss;
    OptimizerSettings optimizer;
    TrainingConfig training;
    AugmentConfig augment;
    AblationConfig ablation;
    EvaluationConfig evaluation;

    // Throws InvalidValue naming the offending key.
    void validate() const;
};

// Loss weights and augmentation after the ablation switches are applied.
LossWeights effective_weights(const ExperimentConfig& config);
AugmentConfig effective_augment(const ExperimentConfig& config);

/// Flat `section.key = value` lines; '#' starts a comment. Missing keys
/// keep their defaults. Throws ParseError, UnknownKey, InvalidValue.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one key from its text form, as a config line would.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

// Every key in canonical order; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);
// Hex FNV-1a of to_text.
std::string fingerprint(const ExperimentConfig& config);

// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace tabssl
