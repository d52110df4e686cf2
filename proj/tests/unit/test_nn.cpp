#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tabssl/losses.hpp"
#include "tabssl/nn.hpp"

using namespace tabssl;
using namespace testutil;

namespace {

ModelDims tiny_dims() { return {1, {1}, 1, 1}; }

void expect_same(const ModelBundle& a, const ModelBundle& b) {
    const auto pa = a.named_parameters(), pb = b.named_parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].first, pb[i].first);
        EXPECT_EQ(pa[i].second.shape(), pb[i].second.shape());
        EXPECT_EQ(vals(pa[i].second), vals(pb[i].second)) << pa[i].first;
    }
}

// One-layer trunk of the given weights; the other parts are unused.
ModelBundle with_trunk(std::vector<LinearParams> trunk) {
    ModelBundle b = init_model({trunk.front().in_dim(), {trunk.back().out_dim()}, 1, 1}, 0);
    b.trunk = std::move(trunk);
    return b;
}

}  // namespace

TEST(InitModel, DeterministicPerSeed) {
    expect_same(init_model(tiny_dims(), 7), init_model(tiny_dims(), 7));
    const ModelDims dims{5, {8, 4}, 3, 6};
    expect_same(init_model(dims, 1), init_model(dims, 1));
    EXPECT_NE(vals(init_model(dims, 1).trunk[0].weights), vals(init_model(dims, 2).trunk[0].weights));
}

TEST(InitModel, ZeroBiasAndGlorotBound) {
    const ModelBundle b = init_model({16, {128, 64}, 16, 32}, 3);
    std::size_t checked = 0;
    for (const auto& [name, t] : b.named_parameters()) {
        if (t.rank() == 1) {
            for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
            continue;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
        for (double v : t.values()) {
            EXPECT_LE(std::abs(v), bound) << name;
            ++checked;
        }
    }
    EXPECT_GE(checked, 1000u);
}

TEST(InitModel, LayoutMatchesInvariants) {
    const ModelBundle b = init_model({5, {8, 4}, 3, 6}, 0);
    EXPECT_NO_THROW(b.validate());
    EXPECT_EQ(b.trunk_out_dim(), 4u);
    EXPECT_EQ(b.projection.front().in_dim(), 4u);
    EXPECT_EQ(b.projection.back().out_dim(), 6u);
    EXPECT_EQ(b.mu_head.out_dim(), 3u);
    EXPECT_EQ(b.logvar_head.in_dim(), 4u);
    EXPECT_EQ(b.decoder.front().in_dim(), 3u);
    EXPECT_EQ(b.decoder.back().out_dim(), 5u);
}

TEST(InitModel, RejectsZeroDims) {
    EXPECT_EQ(code_of([] { init_model({0, {1}, 1, 1}, 0); }), ErrorCode::InvalidDims);
    EXPECT_EQ(code_of([] { init_model({1, {0}, 1, 1}, 0); }), ErrorCode::InvalidDims);
    EXPECT_EQ(code_of([] { init_model({1, {1}, 0, 1}, 0); }), ErrorCode::InvalidDims);
}

TEST(Encode, ZeroAndIdentityAndHandSet) {
    const Tensor x = new_tensor({1, 2}, {1, 1});
    EXPECT_EQ(vals(encode(with_trunk({layer(2, 2, {0, 0, 0, 0}, {0, 0})}), x)), (std::vector<double>{0, 0}));
    const Tensor y = new_tensor({2, 2}, {1, -2, 3, 4});
    EXPECT_EQ(vals(encode(with_trunk({layer(2, 2, {1, 0, 0, 1}, {0, 0})}), y)), vals(y));
    // h1 = relu([1,1] W1 + b1) = relu([3, -1]) = [3, 0]; out = h1 W2 + b2 = 3*2 + 0.5.
    const ModelBundle b = with_trunk({layer(2, 2, {1, -1, 2, 0}, {0, 0}), layer(2, 1, {2, 7}, {0.5})});
    EXPECT_EQ(encode(b, x).item(), 6.5);
    EXPECT_EQ(code_of([&] { encode(b, new_tensor({1, 3}, {1, 1, 1})); }), ErrorCode::ShapeMismatch);
}

TEST(Project, IdentityZeroHandSet) {
    ModelBundle b = init_model({1, {1}, 1, 1}, 0);
    const Tensor h = new_tensor({2, 1}, {0.5, 2});
    b.projection = {layer(1, 1, {1}, {0}), layer(1, 1, {1}, {0})};
    EXPECT_EQ(vals(project(b, h)), vals(h));
    b.projection = {layer(1, 1, {0}, {0}), layer(1, 1, {0}, {0})};
    EXPECT_EQ(vals(project(b, h)), (std::vector<double>{0, 0}));
    // relu(2*0.5 - 0.25) * 3 + 1
    b.projection = {layer(1, 1, {2}, {-0.25}), layer(1, 1, {3}, {1})};
    EXPECT_EQ(project(b, new_tensor({1, 1}, {0.5})).item(), 3.25);
    EXPECT_EQ(code_of([&] { project(b, new_tensor({1, 2}, {1, 1})); }), ErrorCode::ShapeMismatch);
}

TEST(VaeEncode, ZeroHeadsClampAndHandSet) {
    ModelBundle b = init_model({1, {1}, 1, 1}, 0);
    const Tensor h = new_tensor({1, 1}, {1});
    b.mu_head = layer(1, 1, {0}, {0});
    b.logvar_head = layer(1, 1, {0}, {0});
    Posterior p = vae_encode(b, h);
    EXPECT_EQ(p.mu.item(), 0.0);
    EXPECT_EQ(p.logvar.item(), 0.0);
    b.logvar_head = layer(1, 1, {0}, {50});
    EXPECT_EQ(vae_encode(b, h).logvar.item(), 10.0);
    b.logvar_head = layer(1, 1, {0}, {-50});
    EXPECT_EQ(vae_encode(b, h).logvar.item(), -10.0);
    b.mu_head = layer(1, 1, {2}, {0.5});
    b.logvar_head = layer(1, 1, {-1}, {0.25});
    p = vae_encode(b, h);
    EXPECT_EQ(p.mu.item(), 2.5);
    EXPECT_EQ(p.logvar.item(), -0.75);
}

TEST(Reparameterize, Examples) {
    const Tensor mu = new_tensor({1, 2}, {1, -3});
    EXPECT_EQ(vals(reparameterize(mu, new_tensor({1, 2}, {4, -7}), Tensor::zeros({1, 2}))), vals(mu));
    EXPECT_EQ(vals(reparameterize(mu, Tensor::zeros({1, 2}), new_tensor({1, 2}, {0.5, 2}))), (std::vector<double>{1.5, -1}));
    EXPECT_DOUBLE_EQ(reparameterize(new_tensor({1, 1}, {1}), new_tensor({1, 1}, {std::log(4.0)}), new_tensor({1, 1}, {0.5})).item(), 2.0);
    EXPECT_EQ(code_of([&] { reparameterize(mu, Tensor::zeros({1, 1}), Tensor::zeros({1, 2})); }), ErrorCode::ShapeMismatch);
}

TEST(Reparameterize, GradientSkipsNoise) {
    Tensor mu = new_tensor({1, 1}, {1}, true);
    Tensor lv = new_tensor({1, 1}, {0}, true);
    Tensor noise = new_tensor({1, 1}, {0.5}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope s(&tape);
        loss = sum(reparameterize(mu, lv, noise));
    }
    backward(tape, loss);
    EXPECT_EQ(mu.grad()[0], 1.0);
    EXPECT_DOUBLE_EQ(lv.grad()[0], 0.25);
    EXPECT_FALSE(noise.has_grad());
}

TEST(Decode, ZeroIdentityHandSet) {
    ModelBundle b = init_model({2, {1}, 2, 1}, 0);
    const Tensor z = new_tensor({1, 2}, {0.5, -1});
    b.decoder = {layer(2, 2, {0, 0, 0, 0}, {0, 0})};
    EXPECT_EQ(vals(decode(b, z)), (std::vector<double>{0, 0}));
    b.decoder = {layer(2, 2, {1, 0, 0, 1}, {0, 0})};
    EXPECT_EQ(vals(decode(b, z)), vals(z));
    b.decoder = {layer(1, 1, {3}, {0}), layer(1, 1, {-2}, {1})};
    EXPECT_EQ(decode(b, new_tensor({1, 1}, {2})).item(), -11.0);
    EXPECT_EQ(code_of([&] { decode(b, z); }), ErrorCode::ShapeMismatch);
}

TEST(Model, ForwardIsBitDeterministic) {
    const ModelBundle b = init_model({3, {4}, 2, 2}, 9);
    Rng rng(1);
    const Tensor x = random_tensor({4, 3}, rng), noise = random_tensor({4, 2}, rng);
    auto run = [&] {
        const Tensor h = encode(b, x);
        const Posterior p = vae_encode(b, h);
        std::vector<double> out = vals(decode(b, reparameterize(p.mu, p.logvar, noise)));
        const std::vector<double> z = vals(project(b, h));
        out.insert(out.end(), z.begin(), z.end());
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Model, CloneSharesNoStorage) {
    const ModelBundle a = init_model({3, {4}, 2, 2}, 9);
    ModelBundle b = a.clone();
    expect_same(a, b);
    b.trunk[0].weights.mutable_values()[0] += 1.0;
    EXPECT_NE(a.trunk[0].weights.values()[0], b.trunk[0].weights.values()[0]);
}

TEST(Model, ParameterGroups) {
    const ModelBundle b = init_model({3, {4, 5}, 2, 2}, 0);
    EXPECT_EQ(b.parameters(ParamGroup::Trunk).size(), 4u);
    EXPECT_EQ(b.parameters(ParamGroup::Projection).size(), 4u);
    EXPECT_EQ(b.parameters(ParamGroup::Posterior).size(), 4u);
    EXPECT_EQ(b.parameters(ParamGroup::Decoder).size(), 6u);
    EXPECT_EQ(b.parameters().size(), 18u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const ModelBundle a = init_model({7, {5, 3}, 2, 4}, 42);
    const ModelBundle b = checkpoint_from_string(checkpoint_to_string(a));
    EXPECT_EQ(a.dims, b.dims);
    expect_same(a, b);
    const auto path = std::filesystem::temp_directory_path() / "tabssl_ckpt_test.txt";
    save_checkpoint(a, path);
    expect_same(a, load_checkpoint(path));
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
    EXPECT_EQ(code_of([] { checkpoint_from_string("hello"); }), ErrorCode::ParseError);
    std::string text = checkpoint_to_string(init_model({2, {2}, 1, 1}, 0));
    text.resize(text.size() / 2);
    EXPECT_EQ(code_of([&] { checkpoint_from_string(text); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { load_checkpoint("/nonexistent/ckpt"); }), ErrorCode::FileNotFound);
}

TEST(Model, EndToEndGradientCheck) {
    ModelBundle b = init_model({3, {4}, 2, 2}, 5);
    Rng rng(8);
    const Tensor x = random_tensor({4, 3}, rng), v1 = random_tensor({4, 3}, rng), v2 = random_tensor({4, 3}, rng);
    const Tensor noise = random_tensor({4, 2}, rng);
    std::vector<Tensor> params = b.parameters();
    auto objective = [&] {
        const Tensor nce = info_nce(project(b, encode(b, v1)), project(b, encode(b, v2)), 0.5);
        const Posterior p = vae_encode(b, encode(b, x));
        const Tensor xh = decode(b, reparameterize(p.mu, p.logvar, noise));
        return total_loss(nce, elbo_terms(x, xh, p.mu, p.logvar), {1.0, 1.0, 0.5}).value;
    };
    EXPECT_LT(grad_check(objective, params, 1e-5), 1e-4);
}
