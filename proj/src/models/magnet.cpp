#include "surromesh/models/magnet.hpp"

namespace surromesh {

Var mag_layer(Var x, Var weights, Var bias, const AdjacencyPattern& adj) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    const Tensor& wv = weights.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 2 || xv.extent(1) != adj.n_nodes)
        throw DimensionError("mag_layer: input " + xv.shape_str() + " does not match adjacency with " +
                             std::to_string(adj.n_nodes) + " nodes");
    const std::size_t cin = xv.extent(0), n = adj.n_nodes;
    const std::size_t edges = adj.n_directed_edges();
    if (wv.rank() != 3 || wv.extent(0) != edges || wv.extent(2) != cin)
        throw DimensionError("mag_layer: weights " + wv.shape_str() + " do not match " +
                             std::to_string(edges) + " edges with " + std::to_string(cin) +
                             " input channels");
    const std::size_t cout = wv.extent(1);
    if (bv.rank() != 2 || bv.extent(0) != cout || bv.extent(1) != n)
        throw DimensionError("mag_layer: bias " + bv.shape_str() + " must be [C_out, n_nodes]");

    Tensor out = bv;
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : adj.neighbors[i]) {
            const double* we = wv.data() + e * cout * cin;
            for (std::size_t c = 0; c < cout; ++c) {
                double acc = 0.0;
                const double* wc = we + c * cin;
                for (std::size_t d = 0; d < cin; ++d) acc += wc[d] * xv[d * n + j];
                out[c * n + i] += acc;
            }
            ++e;
        }
    }
    const std::size_t px = x.id, pw = weights.id, pb = bias.id;
    const AdjacencyPattern* ap = &adj;
    return t.record(std::move(out), {px, pw, pb},
                    [px, pw, pb, ap, cin, cout, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(px);
        const Tensor& wv2 = tp.value(pw);
        const bool need_dx = tp.grad_path(px);
        const bool need_dw = tp.grad_path(pw);
        if (tp.grad_path(pb)) {
            Tensor& gb = tp.grad(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        std::size_t e = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j : ap->neighbors[i]) {
                const double* we = wv2.data() + e * cout * cin;
                for (std::size_t c = 0; c < cout; ++c) {
                    const double gy = g[c * n + i];
                    if (need_dw) {
                        double* gwc = tp.grad(pw).data() + (e * cout + c) * cin;
                        for (std::size_t d = 0; d < cin; ++d) gwc[d] += gy * xv2[d * n + j];
                    }
                    if (need_dx) {
                        Tensor& gx = tp.grad(px);
                        const double* wc = we + c * cin;
                        for (std::size_t d = 0; d < cin; ++d) gx[d * n + j] += gy * wc[d];
                    }
                }
                ++e;
            }
        }
    });
}

Var graph_pool(Var x, const CoarseningMap& map) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.extent(1) != map.n_fine())
        throw DimensionError("graph_pool: input " + xv.shape_str() + " does not match map with " +
                             std::to_string(map.n_fine()) + " fine nodes");
    const std::size_t c = xv.extent(0), nf = map.n_fine(), nc = map.n_coarse();
    const auto children = map.children();

    Tensor out({c, nc});
    auto argmax = std::make_shared<std::vector<std::size_t>>(c * nc);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < nc; ++p) {
            const auto& kids = children[p];
            std::size_t best = kids[0];
            double bestv = xv[ch * nf + best];
            for (std::size_t k = 1; k < kids.size(); ++k) {
                const double v = xv[ch * nf + kids[k]];
                if (v > bestv) {
                    bestv = v;
                    best = kids[k];
                }
            }
            out[ch * nc + p] = bestv;
            (*argmax)[ch * nc + p] = ch * nf + best;
        }
    }
    const std::size_t px = x.id;
    return t.record(std::move(out), {px}, [px, argmax](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
    });
}

Var graph_unpool(Var x, const CoarseningMap& map) {
    Tape& t = *x.tape;
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.extent(1) != map.n_coarse())
        throw DimensionError("graph_unpool: input " + xv.shape_str() + " does not match map with " +
                             std::to_string(map.n_coarse()) + " coarse nodes");
    const std::size_t c = xv.extent(0), nf = map.n_fine(), nc = map.n_coarse();
    Tensor out({c, nf});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t f = 0; f < nf; ++f) out[ch * nf + f] = xv[ch * nc + map.assignment[f]];
    const std::size_t px = x.id;
    const CoarseningMap* mp = &map;
    return t.record(std::move(out), {px}, [px, mp, c, nf, nc](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(px);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t f = 0; f < nf; ++f)
                gx[ch * nc + mp->assignment[f]] += g[ch * nf + f];
    });
}

MagnetNet::MagnetNet(ModelConfig config, AdjacencyPattern mesh_adjacency)
    : config_(std::move(config)) {
    config_.validate();
    if (mesh_adjacency.n_nodes * static_cast<std::size_t>(config_.dim) != config_.input_dofs)
        throw ConfigError("magnet: adjacency node count does not match input_dofs / dim");
    hierarchy_ = build_hierarchy(mesh_adjacency, config_.levels(), config_.adjacency_power);
}

std::vector<std::size_t> MagnetNet::level_node_counts() const {
    std::vector<std::size_t> counts;
    for (const auto& g : hierarchy_.level_graphs) counts.push_back(g.n_nodes);
    return counts;
}

std::vector<ParamSpec> MagnetNet::parameter_specs() const {
    std::vector<ParamSpec> specs;
    const auto& ch = config_.channels;
    const std::size_t levels = ch.size();
    const std::size_t dim = static_cast<std::size_t>(config_.dim);
    auto mag = [&](const std::string& name, std::size_t level, std::size_t cin, std::size_t cout) {
        const AdjacencyPattern& adj = hierarchy_.mag_patterns[level];
        const std::size_t edges = adj.n_directed_edges();
        const double mean_deg = static_cast<double>(edges) / static_cast<double>(adj.n_nodes);
        specs.push_back({name + ".w", {edges, cout, cin}, InitKind::GlorotMag, mean_deg});
        specs.push_back({name + ".b", {cout, adj.n_nodes}, InitKind::Zero});
    };
    std::size_t cin = dim;
    for (std::size_t l = 0; l < levels; ++l) {
        mag("mag.d" + std::to_string(l) + ".m0", l, cin, ch[l]);
        mag("mag.d" + std::to_string(l) + ".m1", l, ch[l], ch[l]);
        cin = ch[l];
    }
    for (std::size_t l = levels - 1; l-- > 0;) {
        mag("mag.u" + std::to_string(l) + ".m0", l, ch[l + 1] + ch[l], ch[l]);
        mag("mag.u" + std::to_string(l) + ".m1", l, ch[l], ch[l]);
    }
    mag("mag.head", 0, ch[0], dim);
    return specs;
}

Tensor MagnetNet::encode_target(const Tensor& u) const {
    if (u.size() != config_.input_dofs)
        throw DimensionError("magnet: vector length " + std::to_string(u.size()) +
                             " does not match " + std::to_string(config_.input_dofs) + " dofs");
    const std::size_t dim = static_cast<std::size_t>(config_.dim);
    const std::size_t n = config_.input_dofs / dim;
    Tensor x({dim, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < dim; ++c) x[c * n + i] = u[i * dim + c];
    return x;
}

Tensor MagnetNet::decode_output(const Tensor& y) const {
    const std::size_t dim = static_cast<std::size_t>(config_.dim);
    const std::size_t n = config_.input_dofs / dim;
    Tensor u({config_.input_dofs});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < dim; ++c) u[i * dim + c] = y[c * n + i];
    return u;
}

Var MagnetNet::forward(Tape& tape, TapeParams& p, const Tensor& f) const {
    using namespace ops;
    Var x = tape.leaf(encode_target(f), false);
    const std::size_t levels = config_.levels();
    std::vector<Var> skips;
    for (std::size_t l = 0; l < levels; ++l) {
        const std::string d = "mag.d" + std::to_string(l);
        const AdjacencyPattern& adj = hierarchy_.mag_patterns[l];
        x = relu(mag_layer(x, p[d + ".m0.w"], p[d + ".m0.b"], adj));
        x = relu(mag_layer(x, p[d + ".m1.w"], p[d + ".m1.b"], adj));
        if (l + 1 < levels) {
            skips.push_back(x);
            x = graph_pool(x, hierarchy_.maps[l]);
        }
    }
    for (std::size_t l = levels - 1; l-- > 0;) {
        x = graph_unpool(x, hierarchy_.maps[l]);
        x = concat(x, skips[l], 0);
        const std::string u = "mag.u" + std::to_string(l);
        const AdjacencyPattern& adj = hierarchy_.mag_patterns[l];
        x = relu(mag_layer(x, p[u + ".m0.w"], p[u + ".m0.b"], adj));
        x = relu(mag_layer(x, p[u + ".m1.w"], p[u + ".m1.b"], adj));
    }
    return mag_layer(x, p["mag.head.w"], p["mag.head.b"], hierarchy_.mag_patterns[0]);
}

} // namespace surromesh
