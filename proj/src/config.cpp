#include "tabssl/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "tabssl/rng.hpp"

namespace tabssl {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw Error(ErrorCode::InvalidValue, std::string(key) + " = '" + std::string(value) + "': expected " + std::string(expected));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
    T value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) bad_value(key, text, "a non-negative integer");
    return value;
}

double parse_real(std::string_view key, std::string_view text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) bad_value(key, text, "a finite number");
    return value;
}

bool parse_flag(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    bad_value(key, text, "true or false");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        out.push_back(parse_integer<std::size_t>(key, trim(text.substr(start, comma - start))));
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string flag(bool b) { return b ? "true" : "false"; }

struct Key {
    const char* name;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define TEXT_KEY(NAME, FIELD) \
    Key { NAME, [](const ExperimentConfig& c) { return c.FIELD; }, [](ExperimentConfig& c, std::string_view v) { c.FIELD = std::string(v); } }
#define SIZE_KEY(NAME, FIELD)                                                          \
    Key {                                                                              \
        NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },       \
            [](ExperimentConfig& c, std::string_view v) { c.FIELD = parse_integer<std::size_t>(NAME, v); } \
    }
#define U64_KEY(NAME, FIELD)                                                            \
    Key {                                                                               \
        NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },        \
            [](ExperimentConfig& c, std::string_view v) { c.FIELD = parse_integer<std::uint64_t>(NAME, v); } \
    }
#define REAL_KEY(NAME, FIELD) \
    Key { NAME, [](const ExperimentConfig& c) { return format_double(c.FIELD); }, [](ExperimentConfig& c, std::string_view v) { c.FIELD = parse_real(NAME, v); } }
#define FLAG_KEY(NAME, FIELD) \
    Key { NAME, [](const ExperimentConfig& c) { return flag(c.FIELD); }, [](ExperimentConfig& c, std::string_view v) { c.FIELD = parse_flag(NAME, v); } }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        TEXT_KEY("dataset.path", dataset.path),
        TEXT_KEY("dataset.schema", dataset.schema),
        TEXT_KEY("dataset.label", dataset.label),
        U64_KEY("dataset.synthetic_seed", dataset.synthetic_seed),
        SIZE_KEY("dataset.synthetic_rows", dataset.synthetic.n_rows),
        SIZE_KEY("dataset.synthetic_features", dataset.synthetic.n_features),
        SIZE_KEY("dataset.synthetic_classes", dataset.synthetic.n_classes),
        REAL_KEY("dataset.synthetic_box", dataset.synthetic.center_box),
        REAL_KEY("dataset.synthetic_std", dataset.synthetic.cluster_std),
        U64_KEY("run.seed", seed),
        Key{"model.hidden_dims", [](const ExperimentConfig& c) { return join(c.dims.hidden_dims); },
            [](ExperimentConfig& c, std::string_view v) { c.dims.hidden_dims = parse_list("model.hidden_dims", v); }},
        SIZE_KEY("model.latent_dim", dims.latent_dim),
        SIZE_KEY("model.projection_dim", dims.projection_dim),
        REAL_KEY("loss.lambda1", loss.lambda1),
        REAL_KEY("loss.lambda2", loss.lambda2),
        REAL_KEY("loss.tau", loss.tau),
        TEXT_KEY("optimizer.kind", optimizer.kind),
        REAL_KEY("optimizer.lr", optimizer.lr),
        REAL_KEY("optimizer.beta1", optimizer.beta1),
        REAL_KEY("optimizer.beta2", optimizer.beta2),
        REAL_KEY("optimizer.eps", optimizer.eps),
        REAL_KEY("optimizer.weight_decay", optimizer.weight_decay),
        SIZE_KEY("training.steps", training.steps),
        SIZE_KEY("training.batch_size", training.batch_size),
        SIZE_KEY("training.log_interval", training.log_interval),
        REAL_KEY("augment.noise_sigma", augment.noise_sigma),
        REAL_KEY("augment.mask_prob", augment.mask_prob),
        FLAG_KEY("augment.smote", augment.smote.enabled),
        SIZE_KEY("augment.smote_k", augment.smote.k_neighbors),
        FLAG_KEY("ablation.disable_contrastive", ablation.disable_contrastive),
        FLAG_KEY("ablation.disable_variational", ablation.disable_variational),
        FLAG_KEY("ablation.disable_augmentation", ablation.disable_augmentation),
        SIZE_KEY("evaluation.cv_folds", evaluation.cv_folds),
        SIZE_KEY("evaluation.probe_steps", evaluation.probe_steps),
        REAL_KEY("evaluation.probe_lr", evaluation.probe_lr),
        TEXT_KEY("evaluation.probe_optimizer", evaluation.probe_optimizer),
        REAL_KEY("evaluation.train_fraction", evaluation.train_fraction),
        REAL_KEY("evaluation.val_fraction", evaluation.val_fraction),
    };
    return table;
}

#undef TEXT_KEY
#undef SIZE_KEY
#undef U64_KEY
#undef REAL_KEY
#undef FLAG_KEY

void require(bool ok, std::string_view key, std::string_view what) {
    if (!ok) throw Error(ErrorCode::InvalidValue, std::string(key) + " " + std::string(what));
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    (void)ec;
    return std::string(buf, end);
}

void ExperimentConfig::validate() const {
    require(!dims.hidden_dims.empty(), "model.hidden_dims", "needs at least one layer");
    for (std::size_t h : dims.hidden_dims) require(h >= 1, "model.hidden_dims", "entries must be >= 1");
    require(dims.latent_dim >= 1, "model.latent_dim", "must be >= 1");
    require(dims.projection_dim >= 1, "model.projection_dim", "must be >= 1");
    require(loss.tau > 0.0, "loss.tau", "must be > 0");
    require(loss.lambda1 >= 0.0, "loss.lambda1", "must be >= 0");
    require(loss.lambda2 >= 0.0, "loss.lambda2", "must be >= 0");
    const LossWeights w = effective_weights(*this);
    require(w.lambda1 + w.lambda2 > 0.0, "loss.lambda1 + loss.lambda2", "must stay positive after ablation switches");
    try {
        make_optimizer(optimizer);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidValue, std::string("optimizer: ") + e.what());
    }
    require(training.steps >= 1, "training.steps", "must be >= 1");
    require(training.batch_size >= 2, "training.batch_size", "must be >= 2");
    require(training.log_interval >= 1, "training.log_interval", "must be >= 1");
    require(augment.noise_sigma >= 0.0, "augment.noise_sigma", "must be >= 0");
    require(augment.mask_prob >= 0.0 && augment.mask_prob < 1.0, "augment.mask_prob", "must lie in [0, 1)");
    require(augment.smote.k_neighbors >= 1, "augment.smote_k", "must be >= 1");
    require(evaluation.cv_folds == 0 || evaluation.cv_folds >= 2, "evaluation.cv_folds", "must be 0 or >= 2");
    require(evaluation.probe_steps >= 1, "evaluation.probe_steps", "must be >= 1");
    require(evaluation.train_fraction > 0.0 && evaluation.train_fraction < 1.0, "evaluation.train_fraction", "must lie in (0, 1)");
    require(evaluation.val_fraction > 0.0 && evaluation.val_fraction < 1.0, "evaluation.val_fraction", "must lie in (0, 1)");
    try {
        OptimizerSettings probe;
        probe.kind = evaluation.probe_optimizer;
        probe.lr = evaluation.probe_lr;
        make_optimizer(probe);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidValue, std::string("evaluation probe optimizer: ") + e.what());
    }
    if (dataset.path.empty()) {
        require(dataset.synthetic.n_rows >= 2, "dataset.synthetic_rows", "must be >= 2");
        require(dataset.synthetic.n_features >= 1, "dataset.synthetic_features", "must be >= 1");
        require(dataset.synthetic.n_classes >= 1, "dataset.synthetic_classes", "must be >= 1");
        require(dataset.synthetic.cluster_std >= 0.0, "dataset.synthetic_std", "must be >= 0");
    }
}

LossWeights effective_weights(const ExperimentConfig& config) {
    LossWeights w = config.loss;
    if (config.ablation.disable_contrastive) w.lambda1 = 0.0;
    if (config.ablation.disable_variational) w.lambda2 = 0.0;
    return w;
}

AugmentConfig effective_augment(const ExperimentConfig& config) {
    AugmentConfig a = config.augment;
    if (config.ablation.disable_augmentation) {
        a.noise_sigma = 0.0;
        a.mask_prob = 0.0;
    }
    return a;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (const Key& k : keys()) {
        if (key == k.name) {
            k.set(config, trim(value));
            return;
        }
    }
    throw Error(ErrorCode::UnknownKey, "unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> names;
    for (const Key& k : keys()) names.emplace_back(k.name);
    return names;
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig config;
    std::istringstream is{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected 'section.key = value'");
        }
        const std::string_view key = trim(line.substr(0, eq));
        if (key.find('.') == std::string_view::npos || key.find_first_of(" \t") != std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": malformed key '" + std::string(key) + "'");
        }
        set_config_value(config, key, line.substr(eq + 1));
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& config) {
    std::string out;
    for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
    return out;
}

std::string fingerprint(const ExperimentConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_text(config))));
    return buf;
}

}  // namespace tabssl
