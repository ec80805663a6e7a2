#pragma once

#include "surromesh/models/common.hpp"

namespace surromesh {

// Grid U-Net: per level two 3x3 same-padded convolutions with ReLU, 2x2 max
// pooling on the downpath, nearest-neighbor upsampling plus skip
// concatenation on the uppath, and a linear 1x1 head to `dim` channels.
// Input layout: forces as [2, grid_h, grid_w] with one channel per axis.
class CnnUnet : public Model {
public:
    explicit CnnUnet(ModelConfig config);

    const ModelConfig& config() const override { return config_; }
    std::vector<ParamSpec> parameter_specs() const override;
    Var forward(Tape& tape, TapeParams& params, const Tensor& f) const override;
    Tensor encode_target(const Tensor& u) const override;
    Tensor decode_output(const Tensor& y) const override;

    Tensor encode_input(const Tensor& f) const;
    // Grid extents per downpath level, pooling included.
    std::vector<std::pair<std::size_t, std::size_t>> downpath_shapes() const;

private:
    ModelConfig config_;
};

} // namespace surromesh
