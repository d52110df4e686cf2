#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tabssl/config.hpp"
#include "tabssl/data.hpp"
#include "tabssl/train.hpp"

namespace tabssl {

// The configured CSV, or the blobs generator when dataset.path is empty.
DataTable load_dataset(const ExperimentConfig& config);

struct PreparedData {
    Tensor pretrain;  // training rows minus the val hold-out
    Tensor val;
    Tensor train;     // every training row, for the probe
    Tensor test;
    std::vector<int> train_labels;
    std::vector<int> test_labels;
    std::vector<std::string> classes;
    PreprocessPlan plan;
};

/// Fits preprocessing on the training rows and carves the val hold-out
/// (val_fraction of them, at least 2) out of the pretraining set.
/// Throws NoLabels when the table has no label column.
PreparedData prepare_data(const DataTable& table, const ExperimentConfig& config, const std::vector<std::size_t>& train_rows,
                          const std::vector<std::size_t>& test_rows);
// With the configured train/test split.
PreparedData prepare_data(const DataTable& table, const ExperimentConfig& config);

struct RunResult {
    MetricsReport metrics;
    LossCurve curve;  // last fold's curve under cross-validation
    ModelBundle model;
    std::string fingerprint;
};

enum class EncoderMode { Pretrained, Untrained };

/// pretrain -> extract -> probe -> evaluate. Under cv_folds >= 2 the
/// metrics cover pooled out-of-fold predictions over the whole table.
RunResult run_pipeline(const ExperimentConfig& config, EncoderMode mode = EncoderMode::Pretrained);
RunResult run_pipeline(const ExperimentConfig& config, const DataTable& table, EncoderMode mode = EncoderMode::Pretrained);

// Probe and evaluate a given encoder on the configured split.
MetricsReport probe_model(const ModelBundle& model, const ExperimentConfig& config, const PreparedData& data);

struct SweepRow {
    std::string setting;
    std::uint64_t seed = 0;
    std::string fingerprint;
    MetricsReport metrics;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    LossCurve curve;
};

struct CellRun {
    std::string setting;
    std::string slug;  // directory-safe name
    ExperimentConfig config;  // seed overwritten per run
};

struct SweepResult {
    std::vector<std::string> settings;  // table order
    std::vector<SweepRow> rows;         // settings-major, then seeds in the given order
};

struct SweepOptions {
    std::vector<std::uint64_t> seeds{0};
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> out_dir;  // per-cell artifacts when set
};

// Runs every (cell, seed) pair, at most `jobs` at a time. Failures are
// rethrown with the cell and seed prepended.
SweepResult run_cells(const std::vector<CellRun>& cells, const SweepOptions& options);

enum class SweepAxis { Optimizer, LearningRate };
SweepAxis parse_axis(std::string_view text);  // "optimizer" | "lr"; throws InvalidValue
std::vector<std::string> default_grid(SweepAxis axis);

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values, const SweepOptions& options);
SweepResult run_ablation(const ExperimentConfig& base, const SweepOptions& options);

inline const std::vector<std::string>& ablation_labels() {
    static const std::vector<std::string> labels{"Full Model (Baseline)", "w/o Contrastive Loss", "w/o Variational Module",
                                                 "w/o Data Augmentation"};
    return labels;
}

struct TableLine {
    std::string setting;
    double acc, f1, recall, precision;
};

// Per-seed lines (`<setting> seed=<n>`) followed by the seed mean, per setting.
std::vector<TableLine> table_lines(const SweepResult& result);
std::string table_csv(const SweepResult& result);
std::string runs_csv(const SweepResult& result);
std::string table_text(const std::vector<TableLine>& lines);

/// Writes table.csv, runs.csv and table.txt into dir. Throws IoError.
void emit_table(const SweepResult& result, const std::filesystem::path& dir);

// Pretty table from a results directory's table.csv.
std::string report(const std::filesystem::path& dir);

// write-temp-then-rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEps = 1e-5;

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace tabssl
