// Command-line driver: pretraining, probing, sweeps, ablations, gradient
// checks and result reports.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tabssl/harness.hpp"

namespace {

using namespace tabssl;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string seeds;
    std::string out;
    std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_out) {
    args.out = default_out;
    cmd->add_option("config", args.config_path, "Config file (flat section.key = value lines)");
    cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set training.steps=500");
    cmd->add_option("--seed", args.seed, "Run seed");
    cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig config = args.config_path.empty() ? ExperimentConfig{} : load_config(args.config_path);
    for (const std::string& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "--set expects key=value, got '" + kv + "'");
        set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed) config.seed = *args.seed;
    config.validate();
    return config;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

SweepOptions sweep_options(const CommonArgs& args, const ExperimentConfig& config) {
    SweepOptions opt;
    opt.jobs = args.jobs;
    opt.out_dir = args.out;
    if (args.seeds.empty()) {
        opt.seeds = {config.seed};
    } else {
        opt.seeds.clear();
        for (const std::string& s : split_list(args.seeds)) {
            try {
                opt.seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidValue, "bad seed '" + s + "'");
            }
        }
    }
    return opt;
}

void print_metrics(const MetricsReport& m) {
    std::printf("acc %.3f  f1 %.3f  recall %.3f  precision %.3f\n", m.accuracy, m.macro_f1, m.macro_recall, m.macro_precision);
}

std::string metrics_csv(const std::string& setting, const MetricsReport& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f,%.3f\n", setting.c_str(), m.accuracy, m.macro_f1, m.macro_recall, m.macro_precision);
    return std::string("setting,acc,f1,recall,precision\n") + buf;
}

int cmd_pretrain(const CommonArgs& args) {
    const ExperimentConfig config = resolve_config(args);
    const PreparedData data = prepare_data(load_dataset(config), config);
    const PretrainResult r = pretrain(config, data.pretrain, data.val);
    const std::filesystem::path out = args.out;
    write_file_atomic(out / "config.txt", "# fingerprint " + fingerprint(config) + "\n" + to_text(config));
    write_file_atomic(out / "loss_curve.csv", r.curve.to_csv());
    write_file_atomic(out / "checkpoint.txt", checkpoint_to_string(r.model));
    const LossCurveEntry& first = r.curve.entries.front();
    const LossCurveEntry& last = r.curve.entries.back();
    std::printf("step %zu train %.4f val %.4f -> step %zu train %.4f val %.4f\n", first.step, first.train_loss, first.val_loss,
                last.step, last.train_loss, last.val_loss);
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

int cmd_probe(const CommonArgs& args, const std::string& checkpoint) {
    const ExperimentConfig config = resolve_config(args);
    MetricsReport metrics;
    if (!checkpoint.empty()) {
        const PreparedData data = prepare_data(load_dataset(config), config);
        metrics = probe_model(load_checkpoint(checkpoint), config, data);
    } else {
        const RunResult r = run_pipeline(config);
        metrics = r.metrics;
        write_file_atomic(std::filesystem::path(args.out) / "loss_curve.csv", r.curve.to_csv());
    }
    const std::filesystem::path out = args.out;
    write_file_atomic(out / "config.txt", "# fingerprint " + fingerprint(config) + "\n" + to_text(config));
    write_file_atomic(out / "metrics.csv", metrics_csv("probe", metrics));
    print_metrics(metrics);
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis, const std::string& values) {
    const ExperimentConfig config = resolve_config(args);
    const SweepResult r = run_sweep(config, parse_axis(axis), split_list(values), sweep_options(args, config));
    emit_table(r, args.out);
    std::cout << table_text(table_lines(r));
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    const ExperimentConfig config = resolve_config(args);
    const SweepResult r = run_ablation(config, sweep_options(args, config));
    emit_table(r, args.out);
    std::cout << table_text(table_lines(r));
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_gradcheck_suite(seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%-28s %.3e  %s\n", r.name.c_str(), r.max_rel_error, r.passed ? "ok" : "FAIL");
        failed += r.passed ? 0 : 1;
    }
    std::printf("%zu checks, %d failed, %.2f s\n", results.size(), failed, secs);
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive + variational self-supervised learning for tabular data"};
    app.require_subcommand(1);

    CommonArgs pretrain_args, probe_args, sweep_args, ablate_args;
    auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain an encoder and write its checkpoint and loss curve");
    add_common(pretrain_cmd, pretrain_args, "results/pretrain");

    std::string checkpoint;
    auto* probe_cmd = app.add_subcommand("probe", "Linear-probe evaluation (pretrains first unless --checkpoint is given)");
    add_common(probe_cmd, probe_args, "results/probe");
    probe_cmd->add_option("--checkpoint", checkpoint, "Encoder checkpoint from `pretrain`");

    std::string axis, values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Optimizer or learning-rate sweep");
    add_common(sweep_cmd, sweep_args, "results/sweep");
    sweep_cmd->add_option("--axis", axis, "optimizer | lr")->required();
    sweep_cmd->add_option("--values", values, "Comma-separated grid (default: sgd,adam,adamw or 0.005,0.003,0.002,0.001)");
    sweep_cmd->add_option("--seeds", sweep_args.seeds, "Comma-separated seeds");
    sweep_cmd->add_option("--jobs", sweep_args.jobs, "Concurrent cells")->check(CLI::PositiveNumber);

    auto* ablate_cmd = app.add_subcommand("ablate", "The four-setting ablation");
    add_common(ablate_cmd, ablate_args, "results/ablate");
    ablate_cmd->add_option("--seeds", ablate_args.seeds, "Comma-separated seeds");
    ablate_cmd->add_option("--jobs", ablate_args.jobs, "Concurrent cells")->check(CLI::PositiveNumber);

    std::uint64_t gradcheck_seed = 0;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    gradcheck_cmd->add_option("--seed", gradcheck_seed, "Seed for the random inputs");

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "Print the table stored in a results directory");
    report_cmd->add_option("dir", report_dir, "Results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pretrain_cmd) return cmd_pretrain(pretrain_args);
        if (*probe_cmd) return cmd_probe(probe_args, checkpoint);
        if (*sweep_cmd) return cmd_sweep(sweep_args, axis, values);
        if (*ablate_cmd) return cmd_ablate(ablate_args);
        if (*gradcheck_cmd) return cmd_gradcheck(gradcheck_seed);
        if (*report_cmd) {
            std::cout << report(report_dir);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
