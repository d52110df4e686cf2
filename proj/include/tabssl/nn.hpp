#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tabssl/tensor.hpp"

namespace tabssl {

struct LinearParams {
    Tensor weights;  // [in_dim, out_dim]
    Tensor bias;     // [out_dim]

    std::size_t in_dim() const { return weights.dim(0); }
    std::size_t out_dim() const { return weights.dim(1); }
};

struct ModelDims {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{128, 64};
    std::size_t latent_dim = 16;
    std::size_t projection_dim = 32;

    bool operator==(const ModelDims&) const = default;
};

enum class ParamGroup : unsigned {
    Trunk = 1u << 0,
    Projection = 1u << 1,
    Posterior = 1u << 2,  // mu and logvar heads
    Decoder = 1u << 3,
    All = 0xfu,
};

constexpr ParamGroup operator|(ParamGroup a, ParamGroup b) {
    return static_cast<ParamGroup>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool has_group(ParamGroup set, ParamGroup g) {
    return (static_cast<unsigned>(set) & static_cast<unsigned>(g)) != 0;
}

/// Every trainable tensor of the model: a shared encoder trunk feeding both
/// the contrastive projection head and the Gaussian posterior heads, plus
/// the decoder that maps latents back to feature space.
struct ModelBundle {
    std::vector<LinearParams> trunk;
    std::vector<LinearParams> projection;
    LinearParams mu_head;
    LinearParams logvar_head;
    std::vector<LinearParams> decoder;
    ModelDims dims;

    std::size_t trunk_out_dim() const { return trunk.back().out_dim(); }

    // Throws InvalidDims when layer widths do not chain.
    void validate() const;

    std::vector<Tensor> parameters(ParamGroup groups = ParamGroup::All) const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

    // Deep copy; the result shares no storage with *this.
    ModelBundle clone() const;
};

/// Glorot-uniform weights, zero biases. Deterministic in (dims, seed).
ModelBundle init_model(const ModelDims& dims, std::uint64_t seed);

Tensor linear(const LinearParams& layer, const Tensor& x);

// ReLU between layers, nothing after the last one.
Tensor mlp_forward(const std::vector<LinearParams>& layers, const Tensor& x);

Tensor encode(const ModelBundle& bundle, const Tensor& x);
Tensor project(const ModelBundle& bundle, const Tensor& h);

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct Posterior {
    Tensor mu;
    Tensor logvar;  // clamped to [kLogvarMin, kLogvarMax]
};

Posterior vae_encode(const ModelBundle& bundle, const Tensor& h);

/// z = mu + exp(logvar / 2) * noise. The noise tensor is treated as a
/// constant, so gradients reach mu and logvar only.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise);

Tensor decode(const ModelBundle& bundle, const Tensor& z);

// Checkpoints are text with hex-float values, so load(save(m)) is bit-exact.
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const ModelBundle& bundle);
ModelBundle checkpoint_from_string(const std::string& text);

}  // namespace tabssl
