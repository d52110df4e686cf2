#include <algorithm>
#include <cmath>

#include "tabssl/tensor.hpp"

namespace tabssl {

namespace {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

double evaluate_untracked(const std::function<Tensor()>& f) {
    TapeScope no_tape(nullptr);
    return f().item();
}

}  // namespace

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidValue, "grad_check eps must be positive");

    for (Tensor& p : params) {
        p.set_requires_grad(true);
        p.clear_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(&tape);
        const Tensor loss = f();
        backward(tape, loss);
    }
    for (Tensor& p : params) {
        const auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
        p.clear_grad();
    }

    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto values = params[t].mutable_values();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double original = values[k];
            values[k] = original + eps;
            const double up = evaluate_untracked(f);
            values[k] = original - eps;
            const double down = evaluate_untracked(f);
            values[k] = original;
            const double numeric = (up - down) / (2.0 * eps);
            worst = std::max(worst, relative_error(analytic[t][k], numeric));
        }
    }
    return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor probe = x.detach();
    std::vector<Tensor> params{probe};
    return grad_check([&] { return f(probe); }, params, eps);
}

}  // namespace tabssl
