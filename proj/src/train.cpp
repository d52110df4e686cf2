#include "tabssl/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tabssl/rng.hpp"

namespace tabssl {

namespace {

ParamGroup active_groups(const LossWeights& w) {
    ParamGroup g = ParamGroup::Trunk;
    if (w.lambda1 > 0.0) g = g | ParamGroup::Projection;
    if (w.lambda2 > 0.0) g = g | ParamGroup::Posterior | ParamGroup::Decoder;
    return g;
}

Tensor standard_normal(Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (double& e : v) e = dist(rng);
    return Tensor(std::move(shape), std::move(v));
}

// Forward pass of the combined objective. Recorded when a tape is active.
Objective forward_objective(const ModelBundle& model, const Tensor& x, const LossWeights& w, const AugmentConfig& aug,
                            std::uint64_t views_seed, std::uint64_t latent_seed) {
    std::optional<Tensor> nce;
    std::optional<ElboTerms> elbo;
    if (w.lambda1 > 0.0) {
        const auto [v1, v2] = make_views(x, aug, views_seed);
        nce = info_nce(project(model, encode(model, v1)), project(model, encode(model, v2)), w.tau);
    }
    if (w.lambda2 > 0.0) {
        const Posterior post = vae_encode(model, encode(model, x));
        const Tensor z = reparameterize(post.mu, post.logvar, standard_normal(post.mu.shape(), latent_seed));
        elbo = elbo_terms(x, decode(model, z), post.mu, post.logvar);
    }
    return total_loss(nce, elbo, w);
}

bool is_non_finite(ErrorCode code) {
    return code == ErrorCode::NonFiniteValue || code == ErrorCode::NonFiniteLoss || code == ErrorCode::NonFiniteGradient;
}

}  // namespace

std::string LossCurve::to_csv() const {
    std::string out = "step,train_loss,val_loss,nce,recon_nll,kl\n";
    for (const auto& e : entries) {
        out += std::to_string(e.step) + "," + format_double(e.train_loss) + "," + format_double(e.val_loss) + "," +
               format_double(e.nce) + "," + format_double(e.recon_nll) + "," + format_double(e.kl) + "\n";
    }
    return out;
}

ModelBundle initial_model(const ExperimentConfig& config, std::size_t input_dim) {
    ModelDims dims = config.dims;
    dims.input_dim = input_dim;
    return init_model(dims, derive_seed(config.seed, "init"));
}

LossBreakdown evaluate_objective(const ModelBundle& model, const ExperimentConfig& config, const Tensor& x, std::uint64_t substream_seed) {
    TapeScope no_grad(nullptr);
    return forward_objective(model, x, effective_weights(config), effective_augment(config), derive_seed(substream_seed, "views"),
                             derive_seed(substream_seed, "latent"))
        .parts;
}

PretrainResult pretrain(const ExperimentConfig& config, const Tensor& train_features, const Tensor& val_features) {
    config.validate();
    if (train_features.rank() != 2 || val_features.rank() != 2 || train_features.dim(1) != val_features.dim(1)) {
        throw Error(ErrorCode::ShapeMismatch, "train and val features must be [n, d] with equal d");
    }
    const std::size_t n = train_features.dim(0);
    if (n < 2 || val_features.dim(0) < 2) throw Error(ErrorCode::BatchTooSmall, "pretraining needs at least 2 train and 2 val rows");
    const std::size_t batch = std::min(config.training.batch_size, n);

    const LossWeights weights = effective_weights(config);
    const AugmentConfig aug = effective_augment(config);
    PretrainResult result{initial_model(config, train_features.dim(1)), {}};
    ModelBundle& model = result.model;
    std::vector<Tensor> params = model.parameters(active_groups(weights));
    for (Tensor& p : params) p.set_requires_grad(true);
    OptimizerState opt = make_optimizer(config.optimizer);

    Rng batch_rng = make_rng(config.seed, "batch");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const std::size_t steps = config.training.steps;
    for (std::size_t s = 1; s <= steps; ++s) {
        try {
            // Partial Fisher-Yates: the first `batch` slots become a sample without replacement.
            for (std::size_t i = 0; i < batch; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(order[i], order[pick(batch_rng)]);
            }
            const Tensor x = take_rows(train_features, std::span<const std::size_t>(order.data(), batch));

            Tape tape;
            Objective objective;
            {
                TapeScope scope(&tape);
                objective = forward_objective(model, x, weights, aug, derive_seed(config.seed, "train_views", s),
                                              derive_seed(config.seed, "train_latent", s));
            }
            backward(tape, objective.value);

            if (s == 1 || s % config.training.log_interval == 0 || s == steps) {
                TapeScope no_grad(nullptr);
                const Objective val = forward_objective(model, val_features, weights, aug, derive_seed(config.seed, "val_views", s),
                                                        derive_seed(config.seed, "val_latent", s));
                result.curve.entries.push_back(
                    {s, objective.parts.total, val.parts.total, objective.parts.nce, objective.parts.recon_nll, objective.parts.kl});
            }
            step(opt, params);
        } catch (const Error& e) {
            if (is_non_finite(e.code())) throw Error(ErrorCode::NonFiniteLoss, "step " + std::to_string(s) + ": " + e.what());
            throw;
        }
    }
    for (Tensor& p : params) p.set_requires_grad(false);
    return result;
}

Tensor extract_features(const ModelBundle& model, const Tensor& features) {
    TapeScope no_grad(nullptr);
    return encode(model, features).detach();
}

ProbeSettings probe_settings(const ExperimentConfig& config) {
    ProbeSettings s;
    s.steps = config.evaluation.probe_steps;
    s.lr = config.evaluation.probe_lr;
    s.optimizer = config.evaluation.probe_optimizer;
    s.smote = config.augment.smote;
    s.seed = derive_seed(config.seed, "probe");
    return s;
}

namespace {

Tensor standardize(const Tensor& x, const std::vector<double>& mean, const std::vector<double>& scale) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<double> out(x.values().begin(), x.values().end());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = (out[r * d + j] - mean[j]) / scale[j];
    }
    return Tensor({n, d}, std::move(out));
}

}  // namespace

Tensor ProbeClassifier::logits(const Tensor& features) const {
    if (features.rank() != 2 || features.dim(1) != weights.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch, "probe expects [n, " + std::to_string(weights.dim(0)) + "] features");
    }
    TapeScope no_grad(nullptr);
    return matmul(standardize(features, feature_mean, feature_scale), weights) + bias;
}

std::vector<int> ProbeClassifier::predict(const Tensor& features) const {
    const Tensor z = logits(features);
    const std::size_t n = z.dim(0), c = z.dim(1);
    std::vector<int> out(n);
    const auto v = z.values();
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = v.subspan(r * c, c);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

ProbeClassifier linear_probe(const Tensor& features, const std::vector<int>& labels, std::size_t n_classes, const ProbeSettings& settings) {
    if (features.rank() != 2 || features.dim(0) != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "probe got " + std::to_string(labels.size()) + " labels for features " +
                                                   shape_to_string(features.shape()));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw Error(ErrorCode::InvalidValue, "label out of range");
    }
    if (std::set<int>(labels.begin(), labels.end()).size() < 2) throw Error(ErrorCode::SingleClass, "probe training labels hold one class");

    const std::size_t n = features.dim(0), d = features.dim(1);
    ProbeClassifier probe;
    probe.feature_mean.assign(d, 0.0);
    probe.feature_scale.assign(d, 0.0);
    const auto v = features.values();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) probe.feature_mean[j] += v[r * d + j] / static_cast<double>(n);
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = v[r * d + j] - probe.feature_mean[j];
            probe.feature_scale[j] += c * c / static_cast<double>(n);
        }
    }
    for (double& s : probe.feature_scale) s = std::max(std::sqrt(s), kStdFloor);

    Tensor x = standardize(features, probe.feature_mean, probe.feature_scale);
    std::vector<int> y = labels;
    if (settings.smote.enabled) {
        SmoteResult balanced = smote(x, y, settings.smote.k_neighbors, settings.seed);
        x = std::move(balanced.features);
        y = std::move(balanced.labels);
    }
    std::vector<std::vector<std::size_t>> targets(y.size());
    for (std::size_t r = 0; r < y.size(); ++r) targets[r] = {static_cast<std::size_t>(y[r])};

    probe.weights = Tensor::zeros({d, n_classes}, true);
    probe.bias = Tensor::zeros({n_classes}, true);
    std::vector<Tensor> params{probe.weights, probe.bias};
    OptimizerSettings os;
    os.kind = settings.optimizer;
    os.lr = settings.lr;
    OptimizerState opt = make_optimizer(os);
    for (std::size_t s = 0; s < settings.steps; ++s) {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(&tape);
            const Tensor z = matmul(x, probe.weights) + probe.bias;
            loss = mean(log_sum_exp(z, 1) - reshape(gather_columns(z, targets), {y.size()}));
        }
        backward(tape, loss);
        step(opt, params);
    }
    probe.weights.set_requires_grad(false);
    probe.bias.set_requires_grad(false);
    return probe;
}

MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || labels.empty()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) + " labels");
    }
    std::set<int> seen(labels.begin(), labels.end());
    seen.insert(predictions.begin(), predictions.end());
    MetricsReport m;
    m.classes.assign(seen.begin(), seen.end());
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < m.classes.size(); ++i) index[m.classes[i]] = i;
    const std::size_t c = m.classes.size();
    m.confusion.assign(c, std::vector<std::size_t>(c, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) ++m.confusion[index[labels[i]]][index[predictions[i]]];

    std::size_t trace = 0;
    for (std::size_t k = 0; k < c; ++k) {
        const std::size_t tp = m.confusion[k][k];
        trace += tp;
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < c; ++j) {
            row += m.confusion[k][j];
            col += m.confusion[j][k];
        }
        const double p = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        const double r = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        m.macro_precision += p;
        m.macro_recall += r;
        m.macro_f1 += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    m.accuracy = static_cast<double>(trace) / static_cast<double>(labels.size());
    m.macro_precision /= static_cast<double>(c);
    m.macro_recall /= static_cast<double>(c);
    m.macro_f1 /= static_cast<double>(c);
    return m;
}

}  // namespace tabssl
