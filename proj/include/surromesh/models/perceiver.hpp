#pragma once

#include "surromesh/models/attention.hpp"
#include "surromesh/models/common.hpp"

namespace surromesh {

// Attention encoder-decoder with a fixed-size latent bottleneck. Each input
// dof is projected to embed_channels by a shared 1x1 map and concatenated
// with a trainable per-position embedding of the same width; latents
// cross-attend to the embedded inputs, self-attend in blocks, and a
// trainable output query array decodes one scalar per dof.
class PerceiverNet : public Model {
public:
    explicit PerceiverNet(ModelConfig config);

    const ModelConfig& config() const override { return config_; }
    std::vector<ParamSpec> parameter_specs() const override;
    Var forward(Tape& tape, TapeParams& params, const Tensor& f) const override;
    Tensor encode_target(const Tensor& u) const override { return u; }
    Tensor decode_output(const Tensor& y) const override { return y; }

    // [F, 2*embed_channels] embedding of a force vector (projection block
    // then positional block).
    Var embed(Tape& tape, TapeParams& params, const Tensor& f) const;

    std::pair<std::size_t, std::size_t> latent_shape() const {
        return {config_.latent_count, config_.latent_dim};
    }

    struct Trace {
        std::vector<std::size_t> embed_shape;
        std::vector<std::size_t> latent_shape;
    };
    Var forward_traced(Tape& tape, TapeParams& params, const Tensor& f, Trace* trace) const;

private:
    ModelConfig config_;
};

} // namespace surromesh
