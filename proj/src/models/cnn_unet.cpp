#include "surromesh/models/cnn_unet.hpp"

namespace surromesh {

CnnUnet::CnnUnet(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::vector<ParamSpec> CnnUnet::parameter_specs() const {
    std::vector<ParamSpec> specs;
    const auto& ch = config_.channels;
    const std::size_t levels = ch.size();
    auto conv = [&](const std::string& name, std::size_t cin, std::size_t cout, std::size_t k) {
        specs.push_back({name + ".w", {cout, cin, k, k}, InitKind::GlorotConv});
        specs.push_back({name + ".b", {cout}, InitKind::Zero});
    };
    std::size_t cin = 2;
    for (std::size_t l = 0; l < levels; ++l) {
        conv("cnn.d" + std::to_string(l) + ".c0", cin, ch[l], 3);
        conv("cnn.d" + std::to_string(l) + ".c1", ch[l], ch[l], 3);
        cin = ch[l];
    }
    for (std::size_t l = levels - 1; l-- > 0;) {
        conv("cnn.u" + std::to_string(l) + ".c0", ch[l + 1] + ch[l], ch[l], 3);
        conv("cnn.u" + std::to_string(l) + ".c1", ch[l], ch[l], 3);
    }
    conv("cnn.head", ch[0], 2, 1);
    return specs;
}

std::vector<std::pair<std::size_t, std::size_t>> CnnUnet::downpath_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::size_t h = config_.grid_h, w = config_.grid_w;
    shapes.emplace_back(h, w);
    for (std::size_t l = 1; l < config_.levels(); ++l) {
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        shapes.emplace_back(h, w);
    }
    return shapes;
}

Tensor CnnUnet::encode_input(const Tensor& f) const {
    if (f.size() != config_.input_dofs)
        throw DimensionError("cnn_unet: force vector length " + std::to_string(f.size()) +
                             " does not match " + std::to_string(config_.input_dofs) + " dofs");
    const std::size_t h = config_.grid_h, w = config_.grid_w;
    Tensor grid({2, h, w});
    // node (ix, iy) has index iy*grid_h + ix; image rows are the x extent
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t ix = 0; ix < h; ++ix)
            for (std::size_t iy = 0; iy < w; ++iy)
                grid[(c * h + ix) * w + iy] = f[(iy * h + ix) * 2 + c];
    return grid;
}

Tensor CnnUnet::encode_target(const Tensor& u) const { return encode_input(u); }

Tensor CnnUnet::decode_output(const Tensor& y) const {
    const std::size_t h = config_.grid_h, w = config_.grid_w;
    Tensor u({config_.input_dofs});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t ix = 0; ix < h; ++ix)
            for (std::size_t iy = 0; iy < w; ++iy)
                u[(iy * h + ix) * 2 + c] = y[(c * h + ix) * w + iy];
    return u;
}

Var CnnUnet::forward(Tape& tape, TapeParams& p, const Tensor& f) const {
    using namespace ops;
    Var x = tape.leaf(encode_input(f), false);
    const std::size_t levels = config_.levels();
    std::vector<Var> skips;
    for (std::size_t l = 0; l < levels; ++l) {
        const std::string d = "cnn.d" + std::to_string(l);
        x = relu(conv2d(x, p[d + ".c0.w"], p[d + ".c0.b"], Padding::Same));
        x = relu(conv2d(x, p[d + ".c1.w"], p[d + ".c1.b"], Padding::Same));
        if (l + 1 < levels) {
            skips.push_back(x);
            x = maxpool2d(x).out;
        }
    }
    for (std::size_t l = levels - 1; l-- > 0;) {
        const Var skip = skips[l];
        x = upsample2d(x, skip.shape()[1], skip.shape()[2]);
        x = concat(x, skip, 0);
        const std::string u = "cnn.u" + std::to_string(l);
        x = relu(conv2d(x, p[u + ".c0.w"], p[u + ".c0.b"], Padding::Same));
        x = relu(conv2d(x, p[u + ".c1.w"], p[u + ".c1.b"], Padding::Same));
    }
    return conv2d(x, p["cnn.head.w"], p["cnn.head.b"], Padding::Same);
}

} // namespace surromesh
