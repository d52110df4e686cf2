#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tabssl/optim.hpp"

using namespace tabssl;
using namespace testutil;

namespace {

OptimizerState make(const std::string& kind, double lr, double wd = 0.01) {
    OptimizerSettings s;
    s.kind = kind;
    s.lr = lr;
    s.weight_decay = wd;
    return make_optimizer(s);
}

Tensor param(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v), true);
}

void set_grad(Tensor& t, const std::vector<double>& g) {
    t.clear_grad();
    t.accumulate_grad(g);
}

double one_step(OptimizerState& st, double theta, double g) {
    std::vector<Tensor> ps{param({theta})};
    set_grad(ps[0], {g});
    step(st, ps);
    return ps[0].values()[0];
}

}  // namespace

TEST(Optim, ParseKinds) {
    EXPECT_EQ(parse_optimizer_kind("SGD"), OptimizerKind::Sgd);
    EXPECT_EQ(parse_optimizer_kind("adam"), OptimizerKind::Adam);
    EXPECT_EQ(parse_optimizer_kind("AdamW"), OptimizerKind::AdamW);
    EXPECT_EQ(code_of([] { parse_optimizer_kind("rmsprop"); }), ErrorCode::UnknownOptimizer);
    EXPECT_EQ(display_name(OptimizerKind::AdamW), "AdamW");
    EXPECT_EQ(to_string(OptimizerKind::Sgd), "sgd");
}

TEST(Optim, MakeOptimizerDefaultsAndErrors) {
    const OptimizerState st = make_optimizer({});
    EXPECT_EQ(st.kind, OptimizerKind::AdamW);
    EXPECT_EQ(st.lr, 0.002);
    EXPECT_EQ(st.beta1, 0.9);
    EXPECT_EQ(st.beta2, 0.999);
    EXPECT_EQ(st.eps, 1e-8);
    EXPECT_EQ(st.weight_decay, 0.01);
    EXPECT_EQ(st.t, 0u);
    EXPECT_EQ(make("adam", 0.1).weight_decay, 0.0);
    const OptimizerState sgd = make("sgd", 0.1);
    EXPECT_TRUE(sgd.m.empty());
    EXPECT_TRUE(sgd.v.empty());
    EXPECT_EQ(code_of([] { make("rmsprop", 0.1); }), ErrorCode::UnknownOptimizer);
    EXPECT_EQ(code_of([] { make("sgd", 0.0); }), ErrorCode::InvalidLearningRate);
    EXPECT_EQ(code_of([] { make("sgd", 1.0); }), ErrorCode::InvalidLearningRate);
    EXPECT_EQ(code_of([] { make("adamw", 0.1, -1.0); }), ErrorCode::InvalidValue);
}

TEST(Optim, SgdExample) {
    OptimizerState st = make("sgd", 0.1);
    EXPECT_EQ(one_step(st, 1.0, 0.5), 0.95);
    EXPECT_TRUE(st.m.empty());
}

TEST(Optim, AdamFirstStepExample) {
    OptimizerState st = make("adam", 0.1);
    EXPECT_EQ(one_step(st, 0.0, 1.0), -0.1 / (1.0 + 1e-8));
    EXPECT_NEAR(st.m[0][0], 0.1, 1e-15);
    EXPECT_NEAR(st.v[0][0], 0.001, 1e-15);
    EXPECT_EQ(st.t, 1u);
}

TEST(Optim, AdamWDecayIsDecoupled) {
    OptimizerState st = make("adamw", 0.1, 0.01);
    const double theta = one_step(st, 1.0, 0.0);
    EXPECT_EQ(theta, 1.0 - 0.1 * 0.01 * 1.0);
    EXPECT_DOUBLE_EQ(theta, 0.999);
    // Coupled L2 would feed wd*theta through the moments: a full lr-sized step.
    OptimizerState coupled = make("adam", 0.1);
    EXPECT_NEAR(one_step(coupled, 1.0, 0.01), 0.9, 1e-6);
}

TEST(Optim, AdamWWithoutDecayBitEqualsAdam) {
    Rng rng(1);
    std::normal_distribution<double> n;
    std::vector<Tensor> a{param({0.3, -1.2, 2.0}), param({0.5})};
    std::vector<Tensor> b{a[0].clone(), a[1].clone()};
    for (Tensor& t : b) t.set_requires_grad(true);
    OptimizerState sa = make("adam", 0.01), sb = make("adamw", 0.01, 0.0);
    for (int k = 0; k < 100; ++k) {
        for (std::size_t p = 0; p < a.size(); ++p) {
            std::vector<double> g(a[p].numel());
            for (double& e : g) e = n(rng);
            set_grad(a[p], g);
            set_grad(b[p], g);
        }
        step(sa, a);
        step(sb, b);
        for (std::size_t p = 0; p < a.size(); ++p) ASSERT_EQ(vals(a[p]), vals(b[p])) << "step " << k;
    }
}

TEST(Optim, SgdIsLinearInGradient) {
    OptimizerState st = make("sgd", 0.05);
    const double g1 = 0.3, g2 = -1.7;
    const double combined = one_step(st, 2.0, g1 + g2);
    EXPECT_NEAR(combined, 2.0 - 0.05 * g1 - 0.05 * g2, 1e-15);
}

TEST(Optim, ReplayIsDeterministicAndMomentsMirrorShapes) {
    auto run = [] {
        std::vector<Tensor> ps{Tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true), param({0, 0})};
        OptimizerState st = make("adamw", 0.01);
        Rng rng(9);
        std::normal_distribution<double> n;
        for (int k = 0; k < 10; ++k) {
            for (Tensor& p : ps) {
                std::vector<double> g(p.numel());
                for (double& e : g) e = n(rng);
                set_grad(p, g);
            }
            step(st, ps);
            EXPECT_EQ(st.t, static_cast<std::uint64_t>(k + 1));
            for (std::size_t i = 0; i < ps.size(); ++i) {
                EXPECT_EQ(st.m[i].size(), ps[i].numel());
                EXPECT_EQ(st.v[i].size(), ps[i].numel());
                EXPECT_EQ(st.shapes[i], ps[i].shape());
            }
        }
        return vals(ps[0]);
    };
    EXPECT_EQ(run(), run());
}

TEST(Optim, StepClearsGradsAndValidates) {
    OptimizerState st = make("sgd", 0.1);
    std::vector<Tensor> ps{param({1.0}), param({2.0})};
    set_grad(ps[0], {1.0});
    EXPECT_EQ(code_of([&] { step(st, ps); }), ErrorCode::MissingGradient);
    EXPECT_EQ(ps[0].values()[0], 1.0);  // nothing written
    set_grad(ps[1], {std::nan("")});
    EXPECT_EQ(code_of([&] { step(st, ps); }), ErrorCode::NonFiniteGradient);
    set_grad(ps[1], {1.0});
    step(st, ps);
    EXPECT_FALSE(ps[0].has_grad());
    EXPECT_FALSE(ps[1].has_grad());
}

TEST(Optim, ChangedParameterSetIsRejected) {
    OptimizerState st = make("adam", 0.1);
    std::vector<Tensor> ps{param({1.0})};
    set_grad(ps[0], {1.0});
    step(st, ps);
    std::vector<Tensor> other{param({1.0, 2.0})};
    set_grad(other[0], {1.0, 1.0});
    EXPECT_EQ(code_of([&] { step(st, other); }), ErrorCode::ShapeMismatch);
}
