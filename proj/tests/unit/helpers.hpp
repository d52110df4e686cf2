#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <vector>

#include "tabssl/error.hpp"
#include "tabssl/rng.hpp"
#include "tabssl/nn.hpp"
#include "tabssl/tensor.hpp"

namespace testutil {

inline tabssl::ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const tabssl::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return tabssl::ErrorCode::IoError;
}

inline std::vector<double> vals(const tabssl::Tensor& t) { return {t.values().begin(), t.values().end()}; }
inline std::vector<double> grads(const tabssl::Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

inline tabssl::Tensor random_tensor(const tabssl::Shape& shape, tabssl::Rng& rng, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(tabssl::shape_numel(shape));
    for (double& e : v) e = d(rng);
    return tabssl::Tensor(shape, v);
}

// Layer with the given row-major weights and bias.
inline tabssl::LinearParams layer(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b) {
    return {tabssl::Tensor({in, out}, std::move(w)), tabssl::Tensor({out}, std::move(b))};
}

}  // namespace testutil
