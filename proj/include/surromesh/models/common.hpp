#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/autodiff.hpp"
#include "surromesh/mesh.hpp"
#include "surromesh/ops.hpp"
#include "surromesh/rng.hpp"

namespace surromesh {

enum class Architecture { CnnUnet, Magnet, PerceiverIo };

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct ModelConfig {
    Architecture architecture = Architecture::CnnUnet;
    std::size_t input_dofs = 0; // F
    int dim = 2;                // dofs per node

    // cnn_unet / magnet: channels per U-Net level
    std::vector<std::size_t> channels;
    int adjacency_power = 2; // magnet aggregation pattern
    std::size_t grid_h = 0, grid_w = 0; // cnn grid extents (nodes)

    // perceiver
    std::size_t latent_count = 0, latent_dim = 0;
    std::size_t blocks = 0, self_layers_per_block = 0;
    std::size_t cross_heads = 0, self_heads = 0;
    std::size_t embed_channels = 0; // projection width; total embedding is 2x

    std::size_t levels() const { return channels.size(); }
    void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Named trainable tensors; std::map keeps all traversals name-sorted.
using ModelParameters = std::map<std::string, Tensor>;

enum class InitKind { GlorotDense, GlorotConv, GlorotMag, Embedding, Zero, One };

struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
    InitKind init = InitKind::Zero;
    double fan_scale = 1.0; // mean neighborhood size for MAg weights
};

// Registers parameters as tape leaves on first use.
class TapeParams {
public:
    TapeParams(Tape& tape, const ModelParameters& values, bool requires_grad = true)
        : tape_(tape), values_(values), requires_grad_(requires_grad) {}

    Var operator[](const std::string& name);
    const std::map<std::string, Var>& vars() const { return vars_; }

private:
    Tape& tape_;
    const ModelParameters& values_;
    bool requires_grad_;
    std::map<std::string, Var> vars_;
};

class Model {
public:
    virtual ~Model() = default;

    virtual const ModelConfig& config() const = 0;
    virtual std::vector<ParamSpec> parameter_specs() const = 0;

    // Builds the forward graph; the result is in the architecture's layout.
    virtual Var forward(Tape& tape, TapeParams& params, const Tensor& f) const = 0;

    // Dof vector <-> architecture layout.
    virtual Tensor encode_target(const Tensor& u) const = 0;
    virtual Tensor decode_output(const Tensor& y) const = 0;

    ModelParameters init_parameters(Rng& rng) const;
    std::size_t parameter_count() const;
    Tensor predict(const ModelParameters& params, const Tensor& f) const;
};

// Validates parameter names/shapes against the model's specs.
void check_parameters(const Model& model, const ModelParameters& params);

// Eq.-style squared-error loss of one sample: ||h(f) - u||^2.
Var forward_sample_loss(const Model& model, Tape& tape, TapeParams& params, const Tensor& f,
                        const Tensor& u);

// One-shot loss + gradients; used by tests and gradient oracles.
double model_loss_gradients(const Model& model, const ModelParameters& params, const Tensor& f,
                            const Tensor& u, std::map<std::string, Tensor>& grads);

// Factory. CNN validates the mesh is its structured grid; MAgNET builds its
// graph hierarchy from the mesh; Perceiver only requires matching dof counts.
std::unique_ptr<Model> build_model(const ModelConfig& config, const Mesh& mesh);
// Perceiver-only overload for size studies without a mesh.
std::unique_ptr<Model> build_model(const ModelConfig& config);

Tensor glorot_uniform(Rng& rng, std::vector<std::size_t> shape, double fan_in, double fan_out);

} // namespace surromesh
