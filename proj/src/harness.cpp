#include "tabssl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "tabssl/rng.hpp"

namespace tabssl {

DataTable load_dataset(const ExperimentConfig& config) {
    const DatasetConfig& d = config.dataset;
    if (d.path.empty()) return make_blobs(d.synthetic, d.synthetic_seed);
    std::optional<Schema> schema;
    if (!d.schema.empty()) schema = load_schema(d.schema);
    std::optional<std::string> label;
    if (!d.label.empty()) label = d.label;
    return load_csv(d.path, schema, label);
}

PreparedData prepare_data(const DataTable& table, const ExperimentConfig& config, const std::vector<std::size_t>& train_rows,
                          const std::vector<std::size_t>& test_rows) {
    if (!table.label_column) throw Error(ErrorCode::NoLabels, "the dataset has no label column to evaluate against");
    const LabelEncoding enc = encode_labels(table.labels);

    const DataTable train = table.select_rows(train_rows);
    const DataTable test = table.select_rows(test_rows);
    PreparedData data;
    data.classes = enc.classes;
    data.plan = fit_preprocess(train);
    data.train = apply_preprocess(data.plan, train);
    data.test = apply_preprocess(data.plan, test);
    data.train_labels = encode_with(enc.classes, train.labels);
    data.test_labels = encode_with(enc.classes, test.labels);

    const std::size_t n = train_rows.size();
    const auto wanted = static_cast<std::size_t>(std::floor(config.evaluation.val_fraction * static_cast<double>(n)));
    const std::size_t n_val = std::max<std::size_t>(2, wanted);
    if (n < n_val + 2) throw Error(ErrorCode::TooFewRows, std::to_string(n) + " training rows cannot spare a validation split");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed, "val_split");
    std::shuffle(order.begin(), order.end(), rng);
    data.val = take_rows(data.train, std::span<const std::size_t>(order.data(), n_val));
    data.pretrain = take_rows(data.train, std::span<const std::size_t>(order.data() + n_val, n - n_val));
    return data;
}

PreparedData prepare_data(const DataTable& table, const ExperimentConfig& config) {
    const SplitIndices split = split_indices(table.n_rows, config.evaluation.train_fraction, config.seed);
    return prepare_data(table, config, split.train, split.test);
}

namespace {

std::vector<int> probe_predictions(const ModelBundle& model, const ExperimentConfig& config, const PreparedData& data) {
    const ProbeClassifier probe =
        linear_probe(extract_features(model, data.train), data.train_labels, data.classes.size(), probe_settings(config));
    return probe.predict(extract_features(model, data.test));
}

struct FoldOutcome {
    std::vector<int> predictions;
    LossCurve curve;
    ModelBundle model;
};

FoldOutcome run_fold(const ExperimentConfig& config, const PreparedData& data, EncoderMode mode) {
    FoldOutcome out;
    if (mode == EncoderMode::Pretrained) {
        PretrainResult pr = pretrain(config, data.pretrain, data.val);
        out.model = std::move(pr.model);
        out.curve = std::move(pr.curve);
    } else {
        out.model = initial_model(config, data.train.dim(1));
    }
    out.predictions = probe_predictions(out.model, config, data);
    return out;
}

}  // namespace

MetricsReport probe_model(const ModelBundle& model, const ExperimentConfig& config, const PreparedData& data) {
    return evaluate(probe_predictions(model, config, data), data.test_labels);
}

RunResult run_pipeline(const ExperimentConfig& config, const DataTable& table, EncoderMode mode) {
    config.validate();
    RunResult result;
    result.fingerprint = fingerprint(config);
    if (config.evaluation.cv_folds == 0) {
        const PreparedData data = prepare_data(table, config);
        FoldOutcome f = run_fold(config, data, mode);
        result.metrics = evaluate(f.predictions, data.test_labels);
        result.curve = std::move(f.curve);
        result.model = std::move(f.model);
        return result;
    }
    std::vector<int> predictions, labels;
    for (const Fold& fold : kfold(table.n_rows, config.evaluation.cv_folds, config.seed)) {
        const PreparedData data = prepare_data(table, config, fold.train, fold.val);
        FoldOutcome f = run_fold(config, data, mode);
        predictions.insert(predictions.end(), f.predictions.begin(), f.predictions.end());
        labels.insert(labels.end(), data.test_labels.begin(), data.test_labels.end());
        result.curve = std::move(f.curve);
        result.model = std::move(f.model);
    }
    result.metrics = evaluate(predictions, labels);
    return result;
}

RunResult run_pipeline(const ExperimentConfig& config, EncoderMode mode) { return run_pipeline(config, load_dataset(config), mode); }

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string metrics_line(const std::string& setting, const MetricsReport& m) {
    return setting + "," + fixed3(m.accuracy) + "," + fixed3(m.macro_f1) + "," + fixed3(m.macro_recall) + "," + fixed3(m.macro_precision);
}

void write_cell(const std::filesystem::path& dir, const SweepRow& row, const ExperimentConfig& config) {
    write_file_atomic(dir / "config.txt", "# fingerprint " + row.fingerprint + "\n" + to_text(config));
    write_file_atomic(dir / "loss_curve.csv", row.curve.to_csv());
    write_file_atomic(dir / "metrics.csv", "setting,acc,f1,recall,precision\n" + metrics_line(row.setting, row.metrics) + "\n");
}

}  // namespace

SweepResult run_cells(const std::vector<CellRun>& cells, const SweepOptions& options) {
    if (cells.empty()) throw Error(ErrorCode::InvalidValue, "nothing to run: empty grid");
    if (options.seeds.empty()) throw Error(ErrorCode::InvalidValue, "at least one seed is required");
    struct Task {
        const CellRun* cell;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const CellRun& c : cells) {
        for (std::uint64_t s : options.seeds) tasks.push_back({&c, s});
    }
    std::vector<SweepRow> rows(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                ExperimentConfig config = tasks[i].cell->config;
                config.seed = tasks[i].seed;
                RunResult r = run_pipeline(config);
                SweepRow& row = rows[i];
                row.setting = tasks[i].cell->setting;
                row.seed = tasks[i].seed;
                row.fingerprint = r.fingerprint;
                row.metrics = std::move(r.metrics);
                if (!r.curve.entries.empty()) {
                    row.final_train_loss = r.curve.entries.back().train_loss;
                    row.final_val_loss = r.curve.entries.back().val_loss;
                }
                row.curve = std::move(r.curve);
                if (options.out_dir) {
                    write_cell(*options.out_dir / "cells" / (tasks[i].cell->slug + "_seed" + std::to_string(tasks[i].seed)), row, config);
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(options.jobs, 1, tasks.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!errors[i]) continue;
        const std::string where = "cell '" + tasks[i].cell->setting + "' seed " + std::to_string(tasks[i].seed) + ": ";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw Error(e.code(), where + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::IoError, where + e.what());
        }
    }
    SweepResult result;
    for (const CellRun& c : cells) result.settings.push_back(c.setting);
    result.rows = std::move(rows);
    return result;
}

SweepAxis parse_axis(std::string_view text) {
    if (text == "optimizer") return SweepAxis::Optimizer;
    if (text == "lr") return SweepAxis::LearningRate;
    throw Error(ErrorCode::InvalidValue, "sweep axis must be 'optimizer' or 'lr', got '" + std::string(text) + "'");
}

std::vector<std::string> default_grid(SweepAxis axis) {
    if (axis == SweepAxis::Optimizer) return {"sgd", "adam", "adamw"};
    return {"0.005", "0.003", "0.002", "0.001"};
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values, const SweepOptions& options) {
    const std::vector<std::string> grid = values.empty() ? default_grid(axis) : values;
    std::vector<CellRun> cells;
    for (const std::string& value : grid) {
        CellRun cell;
        cell.config = base;
        if (axis == SweepAxis::Optimizer) {
            const OptimizerKind kind = parse_optimizer_kind(value);
            cell.config.optimizer.kind = std::string(to_string(kind));
            cell.setting = std::string(display_name(kind));
            cell.slug = std::string(to_string(kind));
        } else {
            set_config_value(cell.config, "optimizer.lr", value);
            cell.setting = format_double(cell.config.optimizer.lr);
            cell.slug = "lr_" + cell.setting;
        }
        try {
            cell.config.validate();
        } catch (const Error& e) {
            throw Error(e.code(), "cell '" + cell.setting + "': " + e.what());
        }
        cells.push_back(std::move(cell));
    }
    return run_cells(cells, options);
}

SweepResult run_ablation(const ExperimentConfig& base, const SweepOptions& options) {
    const auto& labels = ablation_labels();
    const char* slugs[] = {"full", "no_contrastive", "no_variational", "no_augmentation"};
    std::vector<CellRun> cells;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CellRun cell{labels[i], slugs[i], base};
        cell.config.ablation = AblationConfig{};
        if (i == 1) cell.config.ablation.disable_contrastive = true;
        if (i == 2) cell.config.ablation.disable_variational = true;
        if (i == 3) cell.config.ablation.disable_augmentation = true;
        try {
            cell.config.validate();
        } catch (const Error& e) {
            throw Error(e.code(), "cell '" + cell.setting + "': " + e.what());
        }
        cells.push_back(std::move(cell));
    }
    return run_cells(cells, options);
}

std::vector<TableLine> table_lines(const SweepResult& result) {
    std::vector<TableLine> lines;
    for (const std::string& setting : result.settings) {
        TableLine mean{setting, 0, 0, 0, 0};
        std::size_t count = 0;
        for (const SweepRow& row : result.rows) {
            if (row.setting != setting) continue;
            const MetricsReport& m = row.metrics;
            lines.push_back({setting + " seed=" + std::to_string(row.seed), m.accuracy, m.macro_f1, m.macro_recall, m.macro_precision});
            mean.acc += m.accuracy;
            mean.f1 += m.macro_f1;
            mean.recall += m.macro_recall;
            mean.precision += m.macro_precision;
            ++count;
        }
        if (count == 0) continue;
        const double k = static_cast<double>(count);
        mean.acc /= k;
        mean.f1 /= k;
        mean.recall /= k;
        mean.precision /= k;
        lines.push_back(mean);
    }
    return lines;
}

std::string table_csv(const SweepResult& result) {
    std::string out = "setting,acc,f1,recall,precision\n";
    for (const TableLine& l : table_lines(result)) {
        out += l.setting + "," + fixed3(l.acc) + "," + fixed3(l.f1) + "," + fixed3(l.recall) + "," + fixed3(l.precision) + "\n";
    }
    return out;
}

std::string runs_csv(const SweepResult& result) {
    std::string out = "setting,seed,fingerprint,acc,f1,recall,precision,final_train_loss,final_val_loss\n";
    char buf[64];
    for (const SweepRow& row : result.rows) {
        out += row.setting + "," + std::to_string(row.seed) + "," + row.fingerprint + "," + fixed3(row.metrics.accuracy) + "," +
               fixed3(row.metrics.macro_f1) + "," + fixed3(row.metrics.macro_recall) + "," + fixed3(row.metrics.macro_precision);
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", row.final_train_loss, row.final_val_loss);
        out += buf;
    }
    return out;
}

std::string table_text(const std::vector<TableLine>& lines) {
    std::size_t width = 7;
    for (const TableLine& l : lines) width = std::max(width, l.setting.size());
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    std::string out = pad("Setting", width) + "  Acc    F1-Score  Recall  Precision\n";
    for (const TableLine& l : lines) {
        out += pad(l.setting, width) + "  " + pad(fixed3(l.acc), 5) + "  " + pad(fixed3(l.f1), 8) + "  " + pad(fixed3(l.recall), 6) + "  " +
               fixed3(l.precision) + "\n";
    }
    return out;
}

void emit_table(const SweepResult& result, const std::filesystem::path& dir) {
    if (result.rows.empty()) throw Error(ErrorCode::InvalidValue, "cannot emit an empty result");
    write_file_atomic(dir / "table.csv", table_csv(result));
    write_file_atomic(dir / "runs.csv", runs_csv(result));
    write_file_atomic(dir / "table.txt", table_text(table_lines(result)));
}

std::string report(const std::filesystem::path& dir) {
    const auto path = dir / "table.csv";
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "no table.csv under " + dir.string());
    std::string line;
    std::getline(in, line);
    if (line != "setting,acc,f1,recall,precision") throw Error(ErrorCode::ParseError, path.string() + " has an unexpected header");
    std::vector<TableLine> lines;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw Error(ErrorCode::ParseError, "malformed row '" + line + "'");
        TableLine l{fields[0], 0, 0, 0, 0};
        try {
            l.acc = std::stod(fields[1]);
            l.f1 = std::stod(fields[2]);
            l.recall = std::stod(fields[3]);
            l.precision = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "malformed row '" + line + "'");
        }
        lines.push_back(l);
    }
    return table_text(lines);
}

}  // namespace tabssl
