#pragma once

#include "surromesh/graph.hpp"
#include "surromesh/models/common.hpp"

namespace surromesh {

// Multichannel aggregation layer: y[c,i] = b[c,i] + sum over j in N(i) and
// input channels d of W[(i,j),c,d] * x[d,j]. Weights are stored [E, C_out,
// C_in] in edge-list order (i ascending, neighbors ascending); every directed
// neighbor pair has its own weight and every node its own bias.
Var mag_layer(Var x, Var weights, Var bias, const AdjacencyPattern& adj);

// Per-coarse-node max over children (ties to the smallest child index);
// backward routes to the argmax child.
Var graph_pool(Var x, const CoarseningMap& map);

// Copies each parent value to all of its children.
Var graph_unpool(Var x, const CoarseningMap& map);

// Graph U-Net of MAg layers: two activations per level, pooling on the
// downpath, unpooling plus skip concatenation on the uppath, linear MAg head.
// Input layout: [dim, n_nodes], one channel per axis.
class MagnetNet : public Model {
public:
    MagnetNet(ModelConfig config, AdjacencyPattern mesh_adjacency);

    const ModelConfig& config() const override { return config_; }
    std::vector<ParamSpec> parameter_specs() const override;
    Var forward(Tape& tape, TapeParams& params, const Tensor& f) const override;
    Tensor encode_target(const Tensor& u) const override;
    Tensor decode_output(const Tensor& y) const override;

    const GraphHierarchy& hierarchy() const { return hierarchy_; }
    std::vector<std::size_t> level_node_counts() const;

private:
    ModelConfig config_;
    GraphHierarchy hierarchy_;
};

} // namespace surromesh
