// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   acceptance --cli path/to/tabssl [--only 1,2,3] [--archive dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tabssl/harness.hpp"
#include "tabssl/rng.hpp"

using namespace tabssl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& e : v) e = d(rng);
    return Tensor(std::move(shape), std::move(v));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 1 ----------------------------------------------------------------------

Verdict gradient_suite(const std::string& cli) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_gradcheck_suite(0);
    const double lib_seconds = seconds_since(t0);
    double worst = 0.0;
    std::string worst_name;
    std::size_t failed = 0;
    for (const auto& r : results) {
        if (!r.passed) ++failed;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_name = r.name;
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    const int status = std::system((cli + " gradcheck > /dev/null").c_str());
    const double cli_seconds = seconds_since(t1);
    const bool pass = failed == 0 && worst < kGradCheckTolerance && status == 0 && cli_seconds < 10.0 && lib_seconds < 10.0;
    return {pass, fmt("%zu checks, %zu failed, worst %.2e (%s), cli exit %d in %.2fs", results.size(), failed, worst,
                      worst_name.c_str(), status, cli_seconds)};
}

// ---- 2 ----------------------------------------------------------------------

double brute_force_nce(const Tensor& v1, const Tensor& v2, double tau) {
    const std::size_t b = v1.dim(0), d = v1.dim(1);
    auto row = [d](const Tensor& t, std::size_t i) { return t.values().subspan(i * d, d); };
    long double total = 0.0L;
    for (int dir = 0; dir < 2; ++dir) {
        const Tensor& anchors = dir == 0 ? v1 : v2;
        const Tensor& others = dir == 0 ? v2 : v1;
        for (std::size_t i = 0; i < b; ++i) {
            long double denom = 0.0L, pos = 0.0L;
            for (std::size_t j = 0; j < b; ++j) {
                const long double cross = std::exp(static_cast<long double>(cosine_similarity(row(anchors, i), row(others, j))) / tau);
                denom += cross;
                if (j == i) pos = cross;
                if (j != i) denom += std::exp(static_cast<long double>(cosine_similarity(row(anchors, i), row(anchors, j))) / tau);
            }
            total -= std::log(pos / denom);
        }
    }
    return static_cast<double>(total / (2.0L * static_cast<long double>(b)));
}

Verdict infonce_oracle() {
    Rng rng(derive_seed(0, "acceptance-nce"));
    std::uniform_int_distribution<std::size_t> batch(2, 8), width(1, 4);
    std::uniform_real_distribution<double> temp(0.05, 2.0);
    double worst = 0.0;
    const int cases = 300;
    for (int c = 0; c < cases; ++c) {
        const std::size_t b = batch(rng), d = width(rng);
        const Tensor v1 = uniform({b, d}, rng, -3, 3), v2 = uniform({b, d}, rng, -3, 3);
        const double tau = temp(rng);
        worst = std::max(worst, std::abs(info_nce(v1, v2, tau).item() - brute_force_nce(v1, v2, tau)));
    }
    double worst_uniform = 0.0;
    for (std::size_t b = 2; b <= 64; ++b) {
        const Tensor u({b, 3}, std::vector<double>(3 * b, 0.7));
        worst_uniform = std::max(worst_uniform, std::abs(info_nce(u, u, 0.5).item() - std::log(2.0 * b - 1.0)));
    }
    return {worst <= 1e-9 && worst_uniform <= 1e-12,
            fmt("%d random cases, max |diff| %.2e; uniform case max |diff| %.2e", cases, worst, worst_uniform)};
}

// ---- 3 ----------------------------------------------------------------------

Verdict kl_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng draws(derive_seed(0, "acceptance-kl"));
    std::uniform_real_distribution<double> mu_d(-2, 2), lv_d(-1, 1);
    std::normal_distribution<double> n01;
    constexpr std::size_t kLatent = 4, kSamples = 1'000'000;
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> mu(kLatent), lv(kLatent);
        for (std::size_t j = 0; j < kLatent; ++j) {
            mu[j] = mu_d(draws);
            lv[j] = lv_d(draws);
        }
        // log q(z) - log p(z) at z ~ q, averaged; normalizing constants cancel.
        Rng mc(derive_seed(0, "acceptance-kl-mc", static_cast<std::uint64_t>(draw)));
        double acc = 0.0;
        for (std::size_t s = 0; s < kSamples; ++s) {
            for (std::size_t j = 0; j < kLatent; ++j) {
                const double e = n01(mc), sigma = std::exp(0.5 * lv[j]), z = mu[j] + sigma * e;
                acc += -0.5 * e * e - 0.5 * lv[j] + 0.5 * z * z;
            }
        }
        const double estimate = acc / static_cast<double>(kSamples);
        const double closed = gaussian_kl(Tensor({1, kLatent}, mu), Tensor({1, kLatent}, lv)).item();
        worst = std::max(worst, std::abs(estimate - closed) / closed);
    }
    const double at_prior = gaussian_kl(Tensor::zeros({3, kLatent}), Tensor::zeros({3, kLatent})).item();
    const double secs = seconds_since(t0);
    return {worst < 0.01 && at_prior == 0.0 && secs < 30.0,
            fmt("50 draws x 1e6 samples, worst relative error %.4f%%, KL at prior %g, %.1fs", 100 * worst, at_prior, secs)};
}

// ---- 4 ----------------------------------------------------------------------

OptimizerState optimizer(const char* kind, double lr, double wd) {
    OptimizerSettings s;
    s.kind = kind;
    s.lr = lr;
    s.weight_decay = wd;
    return make_optimizer(s);
}

double single_step(const char* kind, double lr, double wd, double theta, double g) {
    OptimizerState st = optimizer(kind, lr, wd);
    std::vector<Tensor> p{Tensor({1}, {theta}, true)};
    p[0].accumulate_grad(std::vector<double>{g});
    step(st, p);
    return p[0].values()[0];
}

Verdict optimizer_contracts() {
    Rng rng(derive_seed(0, "acceptance-optim"));
    std::normal_distribution<double> n01;
    std::vector<Tensor> a{uniform({3, 4}, rng, -1, 1), uniform({5}, rng, -1, 1)};
    std::vector<Tensor> b{a[0].clone(), a[1].clone()};
    for (auto* set : {&a, &b})
        for (Tensor& t : *set) t.set_requires_grad(true);
    OptimizerState adam = optimizer("adam", 0.01, 0.0), adamw = optimizer("adamw", 0.01, 0.0);
    int first_mismatch = -1;
    for (int k = 0; k < 100; ++k) {
        for (std::size_t p = 0; p < a.size(); ++p) {
            std::vector<double> g(a[p].numel());
            for (double& e : g) e = n01(rng);
            a[p].accumulate_grad(g);
            b[p].accumulate_grad(g);
        }
        step(adam, a);
        step(adamw, b);
        for (std::size_t p = 0; p < a.size() && first_mismatch < 0; ++p) {
            if (!std::equal(a[p].values().begin(), a[p].values().end(), b[p].values().begin())) first_mismatch = k;
        }
    }
    const double sgd = single_step("sgd", 0.1, 0.0, 1.0, 0.5);
    const double adam1 = single_step("adam", 0.1, 0.0, 0.0, 1.0);
    const double decay = single_step("adamw", 0.1, 0.01, 1.0, 0.0);
    const bool hand = sgd == 0.95 && adam1 == -0.1 / (1.0 + 1e-8) && decay == 0.999;
    return {first_mismatch < 0 && hand, fmt("adamw(wd=0) vs adam over 100 steps: %s; sgd %.17g, adam %.17g, adamw %.17g",
                                            first_mismatch < 0 ? "bit-identical" : "diverged", sgd, adam1, decay)};
}

// ---- 5 ----------------------------------------------------------------------

std::string standardization_check(Rng& rng) {
    double worst_mean = 0.0, worst_std = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(5, 200)(rng);
        DataTable t;
        t.n_rows = n;
        for (int c = 0; c < 6; ++c) {
            Column col;
            col.name = "c" + std::to_string(c);
            const double scale = std::pow(10.0, c - 2), shift = 100.0 * c;
            std::normal_distribution<double> d(shift, scale);
            for (std::size_t r = 0; r < n; ++r) col.numbers.emplace_back(d(rng));
            t.columns.push_back(std::move(col));
        }
        const Tensor x = apply_preprocess(fit_preprocess(t), t);
        for (std::size_t c = 0; c < 6; ++c) {
            long double m = 0, s = 0;
            for (std::size_t r = 0; r < n; ++r) m += x.at(r, c);
            m /= n;
            for (std::size_t r = 0; r < n; ++r) s += (x.at(r, c) - m) * (x.at(r, c) - m);
            worst_mean = std::max(worst_mean, static_cast<double>(std::abs(m)));
            worst_std = std::max(worst_std, static_cast<double>(std::abs(std::sqrt(s / n) - 1.0L)));
        }
    }
    if (worst_mean >= 1e-9 || worst_std >= 1e-9) return fmt("standardization |mean| %.2e |std-1| %.2e", worst_mean, worst_std);
    return {};
}

std::string partition_check(Rng& rng) {
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 300)(rng);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(2, std::min<std::size_t>(n, 20))(rng);
        const std::uint64_t seed = rng();

        const double frac = std::uniform_real_distribution<double>(0.5, 0.95)(rng);
        const std::size_t expect_train = static_cast<std::size_t>(std::floor(frac * n + 1e-9));
        if (expect_train >= 1 && expect_train < n) {
            const SplitIndices s = split_indices(n, frac, seed);
            std::vector<std::size_t> all(s.train);
            all.insert(all.end(), s.test.begin(), s.test.end());
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> iota(n);
            std::iota(iota.begin(), iota.end(), 0);
            if (all != iota || s.train.size() != expect_train) return fmt("split n=%zu frac=%g not a partition", n, frac);
            if (split_indices(n, frac, seed).train != s.train) return "split not deterministic";
        }

        const auto folds = kfold(n, k, seed);
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const Fold& f : folds) {
            for (std::size_t i : f.val) ++seen[i];
            std::set<std::size_t> u(f.train.begin(), f.train.end());
            for (std::size_t i : f.val) {
                if (u.count(i)) return fmt("kfold n=%zu k=%zu: row %zu in train and val", n, k, i);
            }
            if (f.train.size() + f.val.size() != n) return fmt("kfold n=%zu k=%zu: fold not exhaustive", n, k);
            lo = std::min(lo, f.val.size());
            hi = std::max(hi, f.val.size());
        }
        if (folds.size() != k || hi - lo > 1) return fmt("kfold n=%zu k=%zu: fold sizes %zu..%zu", n, k, lo, hi);
        if (!std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; })) return fmt("kfold n=%zu k=%zu: coverage", n, k);
        if (kfold(n, k, seed).back().val != folds.back().val) return "kfold not deterministic";
    }
    return {};
}

// Distance from s to the segment [p, q].
double segment_distance(std::span<const double> s, std::span<const double> p, std::span<const double> q) {
    double num = 0, den = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        num += (s[j] - p[j]) * (q[j] - p[j]);
        den += (q[j] - p[j]) * (q[j] - p[j]);
    }
    const double t = den > 0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    double d2 = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double e = p[j] + t * (q[j] - p[j]) - s[j];
        d2 += e * e;
    }
    return std::sqrt(d2);
}

std::string smote_check(Rng& rng) {
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        const int classes = std::uniform_int_distribution<int>(2, 4)(rng);
        std::vector<int> labels;
        for (int c = 0; c < classes; ++c) {
            const std::size_t count = std::uniform_int_distribution<std::size_t>(2, 25)(rng);
            labels.insert(labels.end(), count, c);
        }
        std::shuffle(labels.begin(), labels.end(), rng);
        const std::size_t n = labels.size();
        const Tensor x = uniform({n, d}, rng, -5, 5);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
        const SmoteResult r = smote(x, labels, k, rng());

        std::map<int, std::size_t> before, after;
        for (int y : labels) ++before[y];
        for (int y : r.labels) ++after[y];
        std::size_t majority = 0;
        for (const auto& [c, cnt] : before) majority = std::max(majority, cnt);
        for (const auto& [c, cnt] : after) {
            if (cnt != majority) return fmt("smote trial %d: class %d has %zu, want %zu", trial, c, cnt, majority);
        }
        for (std::size_t i = 0; i < n * d; ++i) {
            if (r.features.values()[i] != x.values()[i]) return fmt("smote trial %d: original row changed", trial);
        }
        if (!std::equal(labels.begin(), labels.end(), r.labels.begin())) return fmt("smote trial %d: original label changed", trial);
        for (std::size_t s = n; s < r.labels.size(); ++s) {
            const int y = r.labels[s];
            if (before[y] == majority) return fmt("smote trial %d: majority row created", trial);
            const auto srow = r.features.values().subspan(s * d, d);
            double best = INFINITY;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] != y) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    if (labels[j] != y || j == i) continue;
                    best = std::min(best, segment_distance(srow, x.values().subspan(i * d, d), x.values().subspan(j * d, d)));
                }
            }
            if (best > 1e-9) return fmt("smote trial %d: synthetic row %zu off every same-class segment (%.2e)", trial, s, best);
        }
    }
    return {};
}

Verdict pipeline_properties() {
    Rng rng(derive_seed(0, "acceptance-pipeline"));
    for (const auto& check : {standardization_check, partition_check, smote_check}) {
        const std::string err = check(rng);
        if (!err.empty()) return {false, err};
    }
    return {true, "standardization, 100 split/kfold triples, 100 SMOTE sets all hold"};
}

// ---- 6, 7, 9 ----------------------------------------------------------------

constexpr std::uint64_t kSeeds[] = {0, 1, 2, 3, 4};

ExperimentConfig desk_config(std::uint64_t seed) {
    ExperimentConfig c;
    c.training.steps = 2000;
    c.seed = seed;
    return c;
}

struct LearningRuns {
    std::vector<RunResult> adamw;
    std::vector<MetricsReport> untrained;
    double seconds = 0.0;
};

LearningRuns& learning_runs() {
    static LearningRuns runs = [] {
        LearningRuns r;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t seed : kSeeds) {
            const ExperimentConfig c = desk_config(seed);
            r.adamw.push_back(run_pipeline(c));
            r.untrained.push_back(run_pipeline(c, EncoderMode::Untrained).metrics);
        }
        r.seconds = seconds_since(t0);
        return r;
    }();
    return runs;
}

Verdict desk_learning() {
    const LearningRuns& r = learning_runs();
    double worst_ratio = 0.0, acc = 0.0, random_acc = 0.0;
    for (std::size_t i = 0; i < r.adamw.size(); ++i) {
        const auto& e = r.adamw[i].curve.entries;
        worst_ratio = std::max(worst_ratio, e.back().train_loss / e.front().train_loss);
        acc += r.adamw[i].metrics.accuracy;
        random_acc += r.untrained[i].accuracy;
    }
    acc /= static_cast<double>(r.adamw.size());
    random_acc /= static_cast<double>(r.adamw.size());
    const bool pass = worst_ratio < 0.5 && acc >= 0.90 && random_acc <= acc - 0.05 && r.seconds < 300.0;
    return {pass, fmt("worst final/first train loss %.3f (< 0.5), mean probe acc %.3f (>= 0.90), untrained encoder %.3f "
                      "(needs <= %.3f), %.0fs",
                      worst_ratio, acc, random_acc, acc - 0.05, r.seconds)};
}

Verdict optimizer_direction() {
    const LearningRuns& r = learning_runs();
    std::vector<double> adamw, sgd;
    for (std::size_t i = 0; i < r.adamw.size(); ++i) adamw.push_back(r.adamw[i].curve.entries.back().train_loss);
    for (std::uint64_t seed : kSeeds) {
        ExperimentConfig c = desk_config(seed);
        c.optimizer.kind = "sgd";
        const PreparedData data = prepare_data(load_dataset(c), c);
        sgd.push_back(pretrain(c, data.pretrain, data.val).curve.entries.back().train_loss);
    }
    const double ma = median(adamw), ms = median(sgd);
    return {ma <= ms, fmt("median final pretraining loss AdamW %.4f, SGD %.4f", ma, ms)};
}

Verdict curve_non_divergence() {
    const LearningRuns& r = learning_runs();
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < r.adamw.size(); ++i) {
        const auto& e = r.adamw[i].curve.entries;
        double running_min = INFINITY;
        for (const auto& x : e) running_min = std::min(running_min, x.val_loss);
        const double gap = std::abs(e.back().train_loss - e.back().val_loss) / e.back().val_loss;
        const double above_min = e.back().val_loss / running_min - 1.0;
        const bool ok = gap <= 0.2 && above_min <= 0.05;
        pass = pass && ok;
        detail += fmt("%sseed %llu gap %.3f, last val %.1f%% above min%s", i ? "; " : "", static_cast<unsigned long long>(kSeeds[i]),
                      gap, 100 * above_min, ok ? "" : " (!)");
    }
    return {pass, detail};
}

// ---- 8 ----------------------------------------------------------------------

Verdict ablation_shape(const fs::path& archive) {
    SweepOptions o;
    o.seeds.assign(std::begin(kSeeds), std::end(kSeeds));
    o.out_dir = archive / "ablation";
    const SweepResult result = run_ablation(desk_config(0), o);
    emit_table(result, *o.out_dir);

    const bool shape = result.settings == ablation_labels() && result.rows.size() == 20 && table_lines(result).size() == 24;
    std::map<std::string, double> mean;
    for (const SweepRow& row : result.rows) mean[row.setting] += row.metrics.accuracy / 5.0;
    const double full = mean[ablation_labels()[0]];
    bool direction = true;
    std::string detail = fmt("full %.3f", full);
    for (std::size_t i = 1; i < 4; ++i) {
        direction = direction && full >= mean[ablation_labels()[i]] - 0.02;
        detail += fmt(", %s %.3f", ablation_labels()[i].c_str(), mean[ablation_labels()[i]]);
    }
    const bool archived = fs::exists(*o.out_dir / "table.csv") && fs::exists(*o.out_dir / "runs.csv");
    return {shape && direction && archived,
            detail + fmt("; rows in order: %s; archived at %s", shape ? "yes" : "no", o.out_dir->string().c_str())};
}

// ---- 10 ---------------------------------------------------------------------

Verdict determinism(const std::string& cli, const fs::path& archive) {
    const fs::path a = archive / "determinism" / "a", b = archive / "determinism" / "b";
    fs::remove_all(archive / "determinism");
    const std::string args = " sweep --axis lr --seeds 0,1 --jobs 2 --set training.steps=150 --set training.log_interval=50";
    const int sa = std::system((cli + args + " --out " + a.string() + " > /dev/null").c_str());
    const int sb = std::system((cli + args + " --out " + b.string() + " > /dev/null").c_str());
    if (sa != 0 || sb != 0) return {false, fmt("sweep exit codes %d and %d", sa, sb)};
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) return {false, "differs: " + rel.string()};
        ++compared;
    }
    std::size_t other = 0;
    for (const auto& entry : fs::recursive_directory_iterator(b)) other += entry.is_regular_file();
    return {compared == other && compared > 0, fmt("%zu files byte-identical across two invocations", compared)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string cli;
    std::vector<int> only;
    std::string archive = "acceptance_artifacts";
    app.add_option("--cli", cli, "path to the tabssl executable")->required();
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--archive", archive, "where artifacts are kept");
    CLI11_PARSE(app, argc, argv);

    const fs::path arch = fs::absolute(archive);
    fs::create_directories(arch);
    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, [&] { return gradient_suite(cli); }},
        {2, infonce_oracle},
        {3, kl_oracle},
        {4, optimizer_contracts},
        {5, pipeline_properties},
        {6, desk_learning},
        {7, optimizer_direction},
        {8, [&] { return ablation_shape(arch); }},
        {9, curve_non_divergence},
        {10, [&] { return determinism(cli, arch); }},
    };

    int failures = 0;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failures += !v.pass;
        std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", id, v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
