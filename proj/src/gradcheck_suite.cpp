#include <cmath>

#include "tabssl/harness.hpp"
#include "tabssl/losses.hpp"
#include "tabssl/nn.hpp"
#include "tabssl/rng.hpp"

namespace tabssl {

namespace {

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& e : v) e = dist(rng);
    return Tensor(shape, std::move(v));
}

// Magnitude in [lo, hi] with a random sign; keeps inputs off kinks and poles.
Tensor away_from_zero(const Shape& shape, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution flip(0.5);
    std::vector<double> v(shape_numel(shape));
    for (double& e : v) e = flip(rng) ? -mag(rng) : mag(rng);
    return Tensor(shape, std::move(v));
}

class Suite {
  public:
    explicit Suite(std::uint64_t seed) : rng_(derive_seed(seed, "gradcheck")) {}

    // Random contraction so every output coordinate carries its own weight.
    Tensor weighted(const Tensor& y) {
        if (y.numel() == 1) return sum(y);
        return sum(y * weight_for(y.shape()));
    }

    void check(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> params) {
        const double err = grad_check(f, params, kGradCheckEps);
        results_.push_back({name, err, err < kGradCheckTolerance});
    }

    Rng& rng() { return rng_; }
    std::vector<GradCheckResult> take() { return std::move(results_); }

  private:
    Tensor weight_for(const Shape& shape) {
        const std::string key = shape_to_string(shape);
        for (auto& [k, w] : weights_) {
            if (k == key) return w;
        }
        weights_.emplace_back(key, uniform(shape, -2.0, 2.0, rng_));
        return weights_.back().second;
    }

    Rng rng_;
    std::vector<std::pair<std::string, Tensor>> weights_;
    std::vector<GradCheckResult> results_;
};

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    Suite s(seed);
    Rng& rng = s.rng();
    auto u = [&](const Shape& shape) { return uniform(shape, -2.0, 2.0, rng); };

    {
        Tensor a = u({3, 4}), b = u({4, 2});
        s.check("matmul", [&] { return s.weighted(matmul(a, b)); }, {a, b});
    }
    {
        Tensor x = u({3, 2});
        s.check("transpose", [&] { return s.weighted(transpose(x)); }, {x});
        s.check("reshape", [&] { return s.weighted(reshape(x, {2, 3})); }, {x});
    }
    {
        Tensor x = u({2, 3});
        s.check("exp", [&] { return s.weighted(exp(x)); }, {x});
        s.check("tanh", [&] { return s.weighted(tanh(x)); }, {x});
        s.check("neg", [&] { return s.weighted(neg(x)); }, {x});
        Tensor pos = uniform({2, 3}, 0.2, 2.0, rng);
        s.check("log", [&] { return s.weighted(log(pos)); }, {pos});
        Tensor off = away_from_zero({2, 3}, 0.1, 2.0, rng);
        s.check("relu", [&] { return s.weighted(relu(off)); }, {off});
        Tensor c = Tensor({2, 3}, {-1.7, -0.5, 0.3, 0.9, 1.6, -1.2});
        s.check("clamp", [&] { return s.weighted(clamp(c, -1.0, 1.0)); }, {c});
    }
    {
        Tensor a = u({3, 2}), b = u({3, 2});
        Tensor den = away_from_zero({3, 2}, 0.5, 2.0, rng);
        s.check("add", [&] { return s.weighted(a + b); }, {a, b});
        s.check("sub", [&] { return s.weighted(a - b); }, {a, b});
        s.check("mul", [&] { return s.weighted(a * b); }, {a, b});
        s.check("div", [&] { return s.weighted(a / den); }, {a, den});
        Tensor row = u({2});
        Tensor row_den = away_from_zero({2}, 0.5, 2.0, rng);
        s.check("add_row_broadcast", [&] { return s.weighted(a + row); }, {a, row});
        s.check("mul_row_broadcast", [&] { return s.weighted(a * row); }, {a, row});
        s.check("div_row_broadcast", [&] { return s.weighted(a / row_den); }, {a, row_den});
        Tensor k = Tensor({1}, {0.7});
        s.check("mul_scalar_broadcast", [&] { return s.weighted(a * k); }, {a, k});
        s.check("sub_scalar_broadcast", [&] { return s.weighted(a - k); }, {a, k});
    }
    {
        Tensor x = u({3, 4});
        s.check("sum_all", [&] { return sum(x * x); }, {x});
        s.check("sum_axis0", [&] { return s.weighted(sum(x, 0)); }, {x});
        s.check("sum_axis1", [&] { return s.weighted(sum(x, 1)); }, {x});
        s.check("mean_all", [&] { return mean(x * x); }, {x});
        s.check("mean_axis0", [&] { return s.weighted(mean(x, 0)); }, {x});
        s.check("max_all", [&] { return max(x); }, {x});
        s.check("max_axis1", [&] { return s.weighted(max(x, 1)); }, {x});
        s.check("log_sum_exp_axis0", [&] { return s.weighted(log_sum_exp(x, 0)); }, {x});
        s.check("log_sum_exp_axis1", [&] { return s.weighted(log_sum_exp(x, 1)); }, {x});
        s.check("normalize_rows", [&] { return s.weighted(normalize_rows(x)); }, {x});
    }
    {
        Tensor top = u({2, 3}), bottom = u({3, 3});
        s.check("concat_rows", [&] { return s.weighted(concat_rows(top, bottom)); }, {top, bottom});
        Tensor x = u({3, 4});
        const std::vector<std::vector<std::size_t>> cols{{0, 2}, {3, 3}, {1, 0}};
        s.check("gather_columns", [&] { return s.weighted(gather_columns(x, cols)); }, {x});
    }
    {
        Tensor v1 = u({4, 3}), v2 = u({4, 3});
        s.check("info_nce", [&] { return info_nce(v1, v2, 0.5); }, {v1, v2});
        Tensor sims = u({4, 4});
        s.check("info_nce_from_similarities", [&] { return info_nce_from_similarities(sims, 0.7); }, {sims});
        Tensor mu = u({4, 3}), lv = uniform({4, 3}, -1.0, 1.0, rng);
        s.check("gaussian_kl", [&] { return gaussian_kl(mu, lv); }, {mu, lv});
        Tensor x = u({4, 3}), xh = u({4, 3});
        s.check("recon_nll", [&] { return recon_nll(x, xh); }, {x, xh});
        const Tensor noise = u({4, 3});
        s.check("reparameterize", [&] { return s.weighted(reparameterize(mu, lv, noise)); }, {mu, lv});
        s.check("elbo_loss", [&] { return elbo_loss(x, xh, mu, lv); }, {xh, mu, lv});
    }
    {
        // Full objective through every parameter of a small model.
        const ModelDims dims{3, {4}, 2, 2};
        const ModelBundle model = init_model(dims, derive_seed(seed, "gradcheck.model"));
        const Tensor x = u({4, 3});
        AugmentConfig aug;
        const auto [v1, v2] = make_views(x, aug, derive_seed(seed, "gradcheck.views"));
        const Tensor noise = u({4, 2});
        const LossWeights w{1.0, 1.0, 0.5};
        auto objective = [&] {
            const Tensor nce = info_nce(project(model, encode(model, v1)), project(model, encode(model, v2)), w.tau);
            const Posterior post = vae_encode(model, encode(model, x));
            const Tensor z = reparameterize(post.mu, post.logvar, noise);
            return total_loss(nce, elbo_terms(x, decode(model, z), post.mu, post.logvar), w).value;
        };
        s.check("total_objective", objective, model.parameters());
    }
    return s.take();
}

}  // namespace tabssl
