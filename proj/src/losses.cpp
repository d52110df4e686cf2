#include "tabssl/losses.hpp"

#include <cmath>

namespace tabssl {

namespace {
constexpr double kNormFloor = 1e-12;

void require_matrix_pair(const Tensor& a, const Tensor& b, const char* where) {
    if (a.rank() != 2 || a.shape() != b.shape()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(where) + " needs two [B, d] tensors of equal shape, got " +
                                                  shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
    }
}

void require_temperature(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidTemperature, "tau must be positive and finite");
}
}  // namespace

void LossWeights::validate() const {
    require_temperature(tau);
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2)) {
        throw Error(ErrorCode::InvalidWeights, "loss weights must be finite and non-negative");
    }
    if (!(lambda1 + lambda2 > 0.0)) throw Error(ErrorCode::InvalidWeights, "lambda1 + lambda2 must be positive");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "cosine_similarity needs equal-length vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
}

Tensor info_nce_from_similarities(const Tensor& similarities, double tau) {
    require_temperature(tau);
    if (similarities.rank() != 2 || similarities.dim(0) != similarities.dim(1) || similarities.dim(0) % 2 != 0) {
        throw Error(ErrorCode::ShapeMismatch, "similarity matrix must be [2B, 2B], got " + shape_to_string(similarities.shape()));
    }
    const std::size_t n = similarities.dim(0);
    const std::size_t batch = n / 2;
    if (batch < 2) throw Error(ErrorCode::BatchTooSmall, "InfoNCE needs at least 2 samples per view");

    std::vector<std::vector<std::size_t>> candidates(n), positives(n);
    for (std::size_t r = 0; r < n; ++r) {
        candidates[r].reserve(n - 1);
        for (std::size_t c = 0; c < n; ++c) {
            if (c != r) candidates[r].push_back(c);
        }
        positives[r] = {r < batch ? r + batch : r - batch};
    }
    const Tensor logits = similarities / tau;
    const Tensor log_denominator = log_sum_exp(gather_columns(logits, candidates), 1);
    const Tensor positive = reshape(gather_columns(logits, positives), {n});
    return mean(log_denominator - positive);
}

Tensor info_nce(const Tensor& view1, const Tensor& view2, double tau) {
    require_matrix_pair(view1, view2, "info_nce");
    require_temperature(tau);
    if (view1.dim(0) < 2) throw Error(ErrorCode::BatchTooSmall, "InfoNCE needs at least 2 samples per view");
    const Tensor z = normalize_rows(concat_rows(view1, view2), kNormFloor);
    return info_nce_from_similarities(matmul(z, transpose(z)), tau);
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar) {
    require_matrix_pair(mu, logvar, "gaussian_kl");
    const Tensor per_dim = mu * mu + exp(logvar) - 1.0 - logvar;
    return mean(sum(per_dim, 1)) * 0.5;
}

Tensor recon_nll(const Tensor& x, const Tensor& x_hat) {
    require_matrix_pair(x, x_hat, "recon_nll");
    const Tensor diff = x - x_hat;
    return mean(sum(diff * diff, 1)) * 0.5;
}

ElboTerms elbo_terms(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar) {
    if (x.rank() == 2 && mu.rank() == 2 && x.dim(0) != mu.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch, "reconstruction and posterior batches differ");
    }
    ElboTerms t;
    t.recon_nll = recon_nll(x, x_hat);
    t.kl = gaussian_kl(mu, logvar);
    t.total = t.recon_nll + t.kl;
    return t;
}

Tensor elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar) {
    return elbo_terms(x, x_hat, mu, logvar).total;
}

Objective total_loss(const std::optional<Tensor>& nce, const std::optional<ElboTerms>& elbo, const LossWeights& w) {
    w.validate();
    if (!nce && !elbo) throw Error(ErrorCode::InvalidWeights, "both loss terms are disabled");

    Objective obj;
    auto finite_item = [](const Tensor& t, const char* name) {
        const double v = t.item();
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, std::string(name) + " is not finite");
        return v;
    };
    if (nce) {
        obj.parts.nce = finite_item(*nce, "nce");
        obj.value = *nce * w.lambda1;
    }
    if (elbo) {
        obj.parts.recon_nll = finite_item(elbo->recon_nll, "recon_nll");
        obj.parts.kl = finite_item(elbo->kl, "kl");
        const Tensor weighted = elbo->total * w.lambda2;
        obj.value = obj.value.defined() ? obj.value + weighted : weighted;
    }
    obj.parts.total = finite_item(obj.value, "total loss");
    return obj;
}

}  // namespace tabssl
