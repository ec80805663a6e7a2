#include "surromesh/models/perceiver.hpp"

namespace surromesh {

PerceiverNet::PerceiverNet(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::vector<ParamSpec> PerceiverNet::parameter_specs() const {
    std::vector<ParamSpec> specs;
    const std::size_t F = config_.input_dofs;
    const std::size_t ec = config_.embed_channels;
    const std::size_t dl = config_.latent_dim;
    specs.push_back({"pcv.embed.w", {1, ec}, InitKind::GlorotDense});
    specs.push_back({"pcv.embed.b", {ec}, InitKind::Zero});
    specs.push_back({"pcv.pos_embed", {F, ec}, InitKind::Embedding});
    specs.push_back({"pcv.latents", {config_.latent_count, dl}, InitKind::Embedding});
    auto append = [&](std::vector<ParamSpec> v) {
        for (auto& s : v) specs.push_back(std::move(s));
    };
    append(attention_param_specs("pcv.enc.", dl, 2 * ec, /*cross=*/true));
    for (std::size_t b = 0; b < config_.blocks; ++b)
        for (std::size_t s = 0; s < config_.self_layers_per_block; ++s)
            append(attention_param_specs(
                "pcv.blk" + std::to_string(b) + ".sa" + std::to_string(s) + ".", dl, dl,
                /*cross=*/false));
    specs.push_back({"pcv.out_query", {F, dl}, InitKind::Embedding});
    append(attention_param_specs("pcv.dec.", dl, dl, /*cross=*/true));
    specs.push_back({"pcv.head.w", {dl, 1}, InitKind::GlorotDense});
    specs.push_back({"pcv.head.b", {1}, InitKind::Zero});
    return specs;
}

Var PerceiverNet::embed(Tape& tape, TapeParams& p, const Tensor& f) const {
    using namespace ops;
    if (f.size() != config_.input_dofs)
        throw DimensionError("perceiver: force vector length " + std::to_string(f.size()) +
                             " does not match " + std::to_string(config_.input_dofs) + " dofs");
    Tensor col({config_.input_dofs, 1}, f.vec());
    Var x = tape.leaf(std::move(col), false);
    Var projected = add_bias_rows(matmul(x, p["pcv.embed.w"]), p["pcv.embed.b"]);
    return concat(projected, p["pcv.pos_embed"], 1);
}

Var PerceiverNet::forward(Tape& tape, TapeParams& p, const Tensor& f) const {
    return forward_traced(tape, p, f, nullptr);
}

Var PerceiverNet::forward_traced(Tape& tape, TapeParams& p, const Tensor& f, Trace* trace) const {
    using namespace ops;
    Var kv = embed(tape, p, f);
    Var latents = attention_block(p, "pcv.enc.", p["pcv.latents"], kv, config_.cross_heads, true);
    if (trace) {
        trace->embed_shape = kv.shape();
        trace->latent_shape = latents.shape();
    }
    for (std::size_t b = 0; b < config_.blocks; ++b)
        for (std::size_t s = 0; s < config_.self_layers_per_block; ++s)
            latents = attention_block(
                p, "pcv.blk" + std::to_string(b) + ".sa" + std::to_string(s) + ".", latents,
                latents, config_.self_heads, false);
    Var decoded = attention_block(p, "pcv.dec.", p["pcv.out_query"], latents, config_.cross_heads,
                                  true);
    Var out = add_bias_rows(matmul(decoded, p["pcv.head.w"]), p["pcv.head.b"]);
    return reshape(out, {config_.input_dofs});
}

} // namespace surromesh
