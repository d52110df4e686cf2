#include "tabssl/nn.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tabssl/rng.hpp"

namespace tabssl {

namespace {

LinearParams glorot_layer(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(in * out);
    for (double& v : w) v = dist(rng);
    return LinearParams{Tensor({in, out}, std::move(w)), Tensor::zeros({out})};
}

void check_layer(const LinearParams& layer, const std::string& name) {
    if (!layer.weights.defined() || !layer.bias.defined() || layer.weights.rank() != 2 || layer.bias.rank() != 1 ||
        layer.bias.dim(0) != layer.weights.dim(1)) {
        throw Error(ErrorCode::InvalidDims, name + " has inconsistent weight/bias shapes");
    }
}

void check_chain(const std::vector<LinearParams>& layers, std::size_t in, const std::string& name) {
    if (layers.empty()) throw Error(ErrorCode::InvalidDims, name + " has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        check_layer(layers[i], name + "." + std::to_string(i));
        if (layers[i].in_dim() != in) {
            throw Error(ErrorCode::InvalidDims, name + "." + std::to_string(i) + " expects width " +
                                                    std::to_string(layers[i].in_dim()) + ", receives " + std::to_string(in));
        }
        in = layers[i].out_dim();
    }
}

void require_width(const Tensor& x, std::size_t width, const char* where) {
    if (x.rank() != 2 || x.dim(1) != width) {
        throw Error(ErrorCode::ShapeMismatch, std::string(where) + " expects [B, " + std::to_string(width) + "], got " +
                                                  shape_to_string(x.shape()));
    }
}

}  // namespace

void ModelBundle::validate() const {
    check_chain(trunk, dims.input_dim, "trunk");
    const std::size_t h = trunk_out_dim();
    check_chain(projection, h, "projection");
    check_layer(mu_head, "mu_head");
    check_layer(logvar_head, "logvar_head");
    if (mu_head.in_dim() != h || logvar_head.in_dim() != h) {
        throw Error(ErrorCode::InvalidDims, "posterior heads must read the trunk output");
    }
    if (mu_head.out_dim() != dims.latent_dim || logvar_head.out_dim() != dims.latent_dim) {
        throw Error(ErrorCode::InvalidDims, "posterior heads must emit latent_dim values");
    }
    check_chain(decoder, dims.latent_dim, "decoder");
    if (decoder.back().out_dim() != dims.input_dim) {
        throw Error(ErrorCode::InvalidDims, "decoder must reconstruct input_dim features");
    }
}

std::vector<std::pair<std::string, Tensor>> ModelBundle::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto add_list = [&](const std::vector<LinearParams>& layers, const std::string& prefix) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers[i].weights);
            out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers[i].bias);
        }
    };
    add_list(trunk, "trunk");
    add_list(projection, "projection");
    out.emplace_back("mu_head.weight", mu_head.weights);
    out.emplace_back("mu_head.bias", mu_head.bias);
    out.emplace_back("logvar_head.weight", logvar_head.weights);
    out.emplace_back("logvar_head.bias", logvar_head.bias);
    add_list(decoder, "decoder");
    return out;
}

std::vector<Tensor> ModelBundle::parameters(ParamGroup groups) const {
    std::vector<Tensor> out;
    auto add_list = [&](const std::vector<LinearParams>& layers) {
        for (const auto& l : layers) {
            out.push_back(l.weights);
            out.push_back(l.bias);
        }
    };
    if (has_group(groups, ParamGroup::Trunk)) add_list(trunk);
    if (has_group(groups, ParamGroup::Projection)) add_list(projection);
    if (has_group(groups, ParamGroup::Posterior)) {
        out.insert(out.end(), {mu_head.weights, mu_head.bias, logvar_head.weights, logvar_head.bias});
    }
    if (has_group(groups, ParamGroup::Decoder)) add_list(decoder);
    return out;
}

ModelBundle ModelBundle::clone() const {
    auto copy_list = [](const std::vector<LinearParams>& layers) {
        std::vector<LinearParams> out;
        out.reserve(layers.size());
        for (const auto& l : layers) out.push_back({l.weights.clone(), l.bias.clone()});
        return out;
    };
    ModelBundle b;
    b.trunk = copy_list(trunk);
    b.projection = copy_list(projection);
    b.mu_head = {mu_head.weights.clone(), mu_head.bias.clone()};
    b.logvar_head = {logvar_head.weights.clone(), logvar_head.bias.clone()};
    b.decoder = copy_list(decoder);
    b.dims = dims;
    return b;
}

ModelBundle init_model(const ModelDims& dims, std::uint64_t seed) {
    if (dims.input_dim < 1 || dims.latent_dim < 1 || dims.projection_dim < 1 || dims.hidden_dims.empty()) {
        throw Error(ErrorCode::InvalidDims, "all model dimensions must be at least 1");
    }
    for (std::size_t h : dims.hidden_dims) {
        if (h < 1) throw Error(ErrorCode::InvalidDims, "hidden widths must be at least 1");
    }

    Rng rng(seed);
    ModelBundle b;
    b.dims = dims;
    std::size_t in = dims.input_dim;
    for (std::size_t h : dims.hidden_dims) {
        b.trunk.push_back(glorot_layer(in, h, rng));
        in = h;
    }
    const std::size_t trunk_out = in;
    b.projection.push_back(glorot_layer(trunk_out, trunk_out, rng));
    b.projection.push_back(glorot_layer(trunk_out, dims.projection_dim, rng));
    b.mu_head = glorot_layer(trunk_out, dims.latent_dim, rng);
    b.logvar_head = glorot_layer(trunk_out, dims.latent_dim, rng);
    in = dims.latent_dim;
    for (auto it = dims.hidden_dims.rbegin(); it != dims.hidden_dims.rend(); ++it) {
        b.decoder.push_back(glorot_layer(in, *it, rng));
        in = *it;
    }
    b.decoder.push_back(glorot_layer(in, dims.input_dim, rng));
    return b;
}

Tensor linear(const LinearParams& layer, const Tensor& x) { return add(matmul(x, layer.weights), layer.bias); }

Tensor mlp_forward(const std::vector<LinearParams>& layers, const Tensor& x) {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = linear(layers[i], h);
        if (i + 1 < layers.size()) h = relu(h);
    }
    return h;
}

Tensor encode(const ModelBundle& bundle, const Tensor& x) {
    require_width(x, bundle.trunk.front().in_dim(), "encode");
    return mlp_forward(bundle.trunk, x);
}

Tensor project(const ModelBundle& bundle, const Tensor& h) {
    require_width(h, bundle.projection.front().in_dim(), "project");
    return mlp_forward(bundle.projection, h);
}

Posterior vae_encode(const ModelBundle& bundle, const Tensor& h) {
    require_width(h, bundle.mu_head.in_dim(), "vae_encode");
    return {linear(bundle.mu_head, h), clamp(linear(bundle.logvar_head, h), kLogvarMin, kLogvarMax)};
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise) {
    if (mu.shape() != logvar.shape() || mu.shape() != noise.shape()) {
        throw Error(ErrorCode::ShapeMismatch, "reparameterize needs matching mu, logvar and noise shapes");
    }
    const Tensor sigma = exp(logvar * 0.5);
    return mu + sigma * noise.detach();
}

Tensor decode(const ModelBundle& bundle, const Tensor& z) {
    require_width(z, bundle.decoder.front().in_dim(), "decode");
    return mlp_forward(bundle.decoder, z);
}

// ---- checkpoints ----------------------------------------------------------

namespace {
constexpr const char* kCheckpointMagic = "tabssl-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}
}  // namespace

std::string checkpoint_to_string(const ModelBundle& bundle) {
    bundle.validate();
    std::ostringstream os;
    os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    os << "dims input=" << bundle.dims.input_dim << " hidden=";
    for (std::size_t i = 0; i < bundle.dims.hidden_dims.size(); ++i) {
        if (i) os << ',';
        os << bundle.dims.hidden_dims[i];
    }
    os << " latent=" << bundle.dims.latent_dim << " projection=" << bundle.dims.projection_dim << '\n';
    for (const auto& [name, t] : bundle.named_parameters()) {
        os << "param " << name;
        for (std::size_t d : t.shape()) os << ' ' << d;
        os << '\n';
        const auto v = t.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) os << ' ';
            os << hex_double(v[i]);
        }
        os << '\n';
    }
    return os.str();
}

static std::size_t parse_count(const std::string& text) {
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw Error(ErrorCode::ParseError, "bad dimension '" + text + "'");
    }
    return value;
}

ModelBundle checkpoint_from_string(const std::string& text) {
    std::istringstream is(text);
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != kCheckpointMagic || version != kCheckpointVersion) {
        throw Error(ErrorCode::ParseError, "not a tabssl checkpoint");
    }
    std::string word;
    ModelDims dims;
    is >> word;
    if (word != "dims") throw Error(ErrorCode::ParseError, "checkpoint is missing its dims header");
    std::string line;
    std::getline(is, line);
    {
        std::istringstream ds(line);
        std::string kv;
        while (ds >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "bad dims entry '" + kv + "'");
            const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if (key == "input") {
                dims.input_dim = parse_count(value);
            } else if (key == "latent") {
                dims.latent_dim = parse_count(value);
            } else if (key == "projection") {
                dims.projection_dim = parse_count(value);
            } else if (key == "hidden") {
                dims.hidden_dims.clear();
                std::istringstream hs(value);
                std::string item;
                while (std::getline(hs, item, ',')) dims.hidden_dims.push_back(parse_count(item));
            } else {
                throw Error(ErrorCode::ParseError, "unknown dims key '" + key + "'");
            }
        }
    }

    std::map<std::string, Tensor> params;
    while (is >> word) {
        if (word != "param") throw Error(ErrorCode::ParseError, "expected 'param', found '" + word + "'");
        std::getline(is, line);
        std::istringstream hs(line);
        std::string name;
        hs >> name;
        Shape shape;
        std::size_t d;
        while (hs >> d) shape.push_back(d);
        std::vector<double> values(shape_numel(shape));
        for (double& v : values) {
            std::string tok;
            if (!(is >> tok)) throw Error(ErrorCode::ParseError, "truncated values for " + name);
            char* end = nullptr;
            v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') throw Error(ErrorCode::ParseError, "bad value '" + tok + "' in " + name);
        }
        params.emplace(name, Tensor(std::move(shape), std::move(values)));
    }

    auto take = [&](const std::string& name) {
        auto it = params.find(name);
        if (it == params.end()) throw Error(ErrorCode::ParseError, "checkpoint lacks " + name);
        Tensor t = it->second;
        params.erase(it);
        return t;
    };
    auto take_list = [&](const std::string& prefix) {
        std::vector<LinearParams> layers;
        for (std::size_t i = 0; params.count(prefix + "." + std::to_string(i) + ".weight"); ++i) {
            const std::string base = prefix + "." + std::to_string(i);
            Tensor w = take(base + ".weight");
            layers.push_back({w, take(base + ".bias")});
        }
        return layers;
    };

    ModelBundle b;
    b.dims = dims;
    b.trunk = take_list("trunk");
    b.projection = take_list("projection");
    b.mu_head.weights = take("mu_head.weight");
    b.mu_head.bias = take("mu_head.bias");
    b.logvar_head.weights = take("logvar_head.weight");
    b.logvar_head.bias = take("logvar_head.bias");
    b.decoder = take_list("decoder");
    if (!params.empty()) throw Error(ErrorCode::ParseError, "unexpected parameter " + params.begin()->first);
    b.validate();
    return b;
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
    const std::string text = checkpoint_to_string(bundle);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

}  // namespace tabssl
