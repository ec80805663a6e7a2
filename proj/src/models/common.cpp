#include "surromesh/models/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "surromesh/models/cnn_unet.hpp"
#include "surromesh/models/magnet.hpp"
#include "surromesh/models/perceiver.hpp"

namespace surromesh {

std::string architecture_name(Architecture a) {
    switch (a) {
        case Architecture::CnnUnet: return "cnn_unet";
        case Architecture::Magnet: return "magnet";
        case Architecture::PerceiverIo: return "perceiver_io";
    }
    throw ConfigError("unknown architecture");
}

Architecture architecture_from_name(const std::string& name) {
    if (name == "cnn_unet" || name == "cnn") return Architecture::CnnUnet;
    if (name == "magnet") return Architecture::Magnet;
    if (name == "perceiver_io" || name == "perceiver") return Architecture::PerceiverIo;
    throw ConfigError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
    if (input_dofs == 0) throw ConfigError("model config: input_dofs must be > 0");
    if (dim != 2 && dim != 3) throw ConfigError("model config: dim must be 2 or 3");
    switch (architecture) {
        case Architecture::CnnUnet:
            if (channels.empty()) throw ConfigError("cnn_unet: channels must be non-empty");
            if (grid_h < 2 || grid_w < 2) throw ConfigError("cnn_unet: grid extents must be >= 2");
            if (dim != 2) throw ConfigError("cnn_unet: only 2D grids are supported");
            if (input_dofs != 2 * grid_h * grid_w)
                throw ConfigError("cnn_unet: input_dofs must equal 2*grid_h*grid_w");
            break;
        case Architecture::Magnet:
            if (channels.empty()) throw ConfigError("magnet: channels must be non-empty");
            if (adjacency_power < 1) throw ConfigError("magnet: adjacency power must be >= 1");
            break;
        case Architecture::PerceiverIo:
            if (latent_count == 0 || latent_dim == 0)
                throw ConfigError("perceiver: latent count and dim must be > 0");
            if (blocks == 0 || self_layers_per_block == 0)
                throw ConfigError("perceiver: blocks and self layers must be > 0");
            if (cross_heads == 0 || self_heads == 0)
                throw ConfigError("perceiver: head counts must be > 0");
            if (embed_channels == 0) throw ConfigError("perceiver: embed_channels must be > 0");
            if (latent_dim % self_heads != 0 || latent_dim % cross_heads != 0)
                throw ConfigError("perceiver: head counts must divide latent dim");
            break;
    }
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["architecture"] = architecture_name(c.architecture);
    j["input_dofs"] = c.input_dofs;
    j["dim"] = c.dim;
    switch (c.architecture) {
        case Architecture::CnnUnet:
            j["channels"] = c.channels;
            j["grid_h"] = c.grid_h;
            j["grid_w"] = c.grid_w;
            break;
        case Architecture::Magnet:
            j["channels"] = c.channels;
            j["adjacency_power"] = c.adjacency_power;
            break;
        case Architecture::PerceiverIo:
            j["latent_count"] = c.latent_count;
            j["latent_dim"] = c.latent_dim;
            j["blocks"] = c.blocks;
            j["self_layers_per_block"] = c.self_layers_per_block;
            j["cross_heads"] = c.cross_heads;
            j["self_heads"] = c.self_heads;
            j["embed_channels"] = c.embed_channels;
            break;
    }
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.architecture = architecture_from_name(j.at("architecture").get<std::string>());
        c.input_dofs = j.at("input_dofs").get<std::size_t>();
        c.dim = j.at("dim").get<int>();
        switch (c.architecture) {
            case Architecture::CnnUnet:
                c.channels = j.at("channels").get<std::vector<std::size_t>>();
                c.grid_h = j.at("grid_h").get<std::size_t>();
                c.grid_w = j.at("grid_w").get<std::size_t>();
                break;
            case Architecture::Magnet:
                c.channels = j.at("channels").get<std::vector<std::size_t>>();
                c.adjacency_power = j.value("adjacency_power", 2);
                break;
            case Architecture::PerceiverIo:
                c.latent_count = j.at("latent_count").get<std::size_t>();
                c.latent_dim = j.at("latent_dim").get<std::size_t>();
                c.blocks = j.at("blocks").get<std::size_t>();
                c.self_layers_per_block = j.at("self_layers_per_block").get<std::size_t>();
                c.cross_heads = j.at("cross_heads").get<std::size_t>();
                c.self_heads = j.at("self_heads").get<std::size_t>();
                c.embed_channels = j.at("embed_channels").get<std::size_t>();
                break;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config json: ") + e.what());
    }
    c.validate();
    return c;
}

Var TapeParams::operator[](const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    auto vit = values_.find(name);
    if (vit == values_.end()) throw ConfigError("missing parameter '" + name + "'");
    Var v = tape_.leaf(vit->second, requires_grad_);
    vars_.emplace(name, v);
    return v;
}

Tensor glorot_uniform(Rng& rng, std::vector<std::size_t> shape, double fan_in, double fan_out) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

ModelParameters Model::init_parameters(Rng& rng) const {
    ModelParameters params;
    for (const ParamSpec& spec : parameter_specs()) {
        Tensor t;
        switch (spec.init) {
            case InitKind::GlorotDense: {
                const double fi = static_cast<double>(spec.shape[0]);
                const double fo = static_cast<double>(spec.shape[1]);
                t = glorot_uniform(rng, spec.shape, fi, fo);
                break;
            }
            case InitKind::GlorotConv: {
                const double rf = static_cast<double>(spec.shape[2] * spec.shape[3]);
                const double fi = static_cast<double>(spec.shape[1]) * rf;
                const double fo = static_cast<double>(spec.shape[0]) * rf;
                t = glorot_uniform(rng, spec.shape, fi, fo);
                break;
            }
            case InitKind::GlorotMag: {
                // shape [E, C_out, C_in]; fans scaled by the mean neighborhood size
                const double fi = static_cast<double>(spec.shape[2]) * spec.fan_scale;
                const double fo = static_cast<double>(spec.shape[1]) * spec.fan_scale;
                t = glorot_uniform(rng, spec.shape, fi, fo);
                break;
            }
            case InitKind::Embedding: {
                t = Tensor(spec.shape);
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.02 * rng.normal();
                break;
            }
            case InitKind::Zero: t = Tensor::zeros(spec.shape); break;
            case InitKind::One: t = Tensor::full(spec.shape, 1.0); break;
        }
        t.requires_grad = true;
        if (!params.emplace(spec.name, std::move(t)).second)
            throw ConfigError("duplicate parameter name '" + spec.name + "'");
    }
    return params;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const ParamSpec& spec : parameter_specs()) {
        std::size_t s = 1;
        for (std::size_t e : spec.shape) s *= e;
        n += s;
    }
    return n;
}

Tensor Model::predict(const ModelParameters& params, const Tensor& f) const {
    Tape tape;
    TapeParams tp(tape, params, /*requires_grad=*/false);
    Var out = forward(tape, tp, f);
    return decode_output(out.value());
}

void check_parameters(const Model& model, const ModelParameters& params) {
    const auto specs = model.parameter_specs();
    if (specs.size() != params.size())
        throw ConfigError("parameter count mismatch: expected " + std::to_string(specs.size()) +
                          ", got " + std::to_string(params.size()));
    for (const ParamSpec& spec : specs) {
        auto it = params.find(spec.name);
        if (it == params.end()) throw ConfigError("missing parameter '" + spec.name + "'");
        if (it->second.shape() != spec.shape)
            throw ConfigError("parameter '" + spec.name + "' has shape " + it->second.shape_str());
        if (!it->second.all_finite())
            throw ConfigError("parameter '" + spec.name + "' contains non-finite values");
    }
}

Var forward_sample_loss(const Model& model, Tape& tape, TapeParams& params, const Tensor& f,
                        const Tensor& u) {
    Var pred = model.forward(tape, params, f);
    Var target = tape.leaf(model.encode_target(u), false);
    return ops::mse_loss(pred, target, 1);
}

double model_loss_gradients(const Model& model, const ModelParameters& params, const Tensor& f,
                            const Tensor& u, std::map<std::string, Tensor>& grads) {
    Tape tape;
    TapeParams tp(tape, params, true);
    Var loss = forward_sample_loss(model, tape, tp, f, u);
    tape.backward(loss);
    grads.clear();
    for (const auto& [name, var] : tp.vars()) grads[name] = var.grad();
    return loss.value()[0];
}

std::unique_ptr<Model> build_model(const ModelConfig& config, const Mesh& mesh) {
    config.validate();
    if (config.input_dofs != mesh.n_dofs())
        throw ConfigError("model config: input_dofs " + std::to_string(config.input_dofs) +
                          " does not match mesh dof count " + std::to_string(mesh.n_dofs()));
    switch (config.architecture) {
        case Architecture::CnnUnet: {
            if (mesh.dim != 2 || mesh.n_nodes() != config.grid_h * config.grid_w ||
                mesh.elements.size() != (config.grid_h - 1) * (config.grid_w - 1))
                throw ConfigError("cnn_unet: mesh is not the configured structured grid");
            return std::make_unique<CnnUnet>(config);
        }
        case Architecture::Magnet: {
            ModelConfig c = config;
            c.dim = mesh.dim;
            return std::make_unique<MagnetNet>(c, node_adjacency_from_elements(mesh));
        }
        case Architecture::PerceiverIo: return std::make_unique<PerceiverNet>(config);
    }
    throw ConfigError("unknown architecture");
}

std::unique_ptr<Model> build_model(const ModelConfig& config) {
    config.validate();
    if (config.architecture != Architecture::PerceiverIo)
        throw ConfigError("build_model without a mesh is only supported for perceiver_io");
    return std::make_unique<PerceiverNet>(config);
}

} // namespace surromesh
