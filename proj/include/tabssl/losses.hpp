#pragma once

#include <optional>
#include <span>

#include "tabssl/tensor.hpp"

namespace tabssl {

struct LossWeights {
    double lambda1 = 1.0;  // contrastive term
    double lambda2 = 1.0;  // variational term
    double tau = 0.5;      // InfoNCE temperature

    // tau > 0, both weights >= 0, and at least one positive.
    void validate() const;
};

struct LossBreakdown {
    double nce = 0.0;
    double recon_nll = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

// Norms are floored at 1e-12, so a zero vector yields ~0 instead of NaN.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Symmetric in-batch InfoNCE over two views of B samples.
///
/// Rows of view1 and view2 are stacked into 2B anchors. Each anchor's
/// candidates are the other 2B - 1 rows: its counterpart in the other view
/// (the positive) and 2B - 2 negatives. Similarities are cosines of the
/// rows; the loss is the mean over all 2B anchors of
/// log_sum_exp(candidates / tau) - positive / tau.
Tensor info_nce(const Tensor& view1, const Tensor& view2, double tau);

/// The same loss starting from a precomputed [2B, 2B] similarity matrix
/// laid out as [view1; view2] x [view1; view2]. The diagonal is ignored.
Tensor info_nce_from_similarities(const Tensor& similarities, double tau);

// KL(N(mu, exp(logvar)) || N(0, I)), summed over latent dims, mean over batch.
Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar);

// Mean over batch of 0.5 * ||x - x_hat||^2.
Tensor recon_nll(const Tensor& x, const Tensor& x_hat);

struct ElboTerms {
    Tensor recon_nll;
    Tensor kl;
    Tensor total;  // recon_nll + kl, i.e. the negated ELBO
};

ElboTerms elbo_terms(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar);
Tensor elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar);

struct Objective {
    Tensor value;  // differentiable total
    LossBreakdown parts;
};

/// lambda1 * nce + lambda2 * (recon + kl). Either term may be absent when
/// its ablation skips the forward pass; absent terms contribute zero.
Objective total_loss(const std::optional<Tensor>& nce, const std::optional<ElboTerms>& elbo, const LossWeights& w);

}  // namespace tabssl
