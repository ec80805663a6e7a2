#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "surromesh/gradcheck.hpp"

#include "support/model_fd.hpp"
#include "surromesh/models/attention.hpp"
#include "surromesh/models/cnn_unet.hpp"
#include "surromesh/models/magnet.hpp"
#include "surromesh/models/perceiver.hpp"

using namespace surromesh;
using namespace surromesh::ops;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

AdjacencyPattern self_loop_graph(std::size_t n) {
    AdjacencyPattern adj;
    adj.n_nodes = n;
    adj.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) adj.neighbors[i] = {i};
    return adj;
}

AdjacencyPattern random_graph(Rng& rng, std::size_t n, double p) {
    AdjacencyPattern adj;
    adj.n_nodes = n;
    adj.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) adj.neighbors[i].push_back(i);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p) {
                adj.neighbors[i].push_back(j);
                adj.neighbors[j].push_back(i);
            }
    for (auto& nb : adj.neighbors) std::sort(nb.begin(), nb.end());
    return adj;
}

// triple-loop MAg reference
Tensor mag_reference(const Tensor& x, const Tensor& w, const Tensor& b,
                     const AdjacencyPattern& adj) {
    const std::size_t cin = x.extent(0), n = adj.n_nodes, cout = b.extent(0);
    Tensor y = b;
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j : adj.neighbors[i]) {
            for (std::size_t c = 0; c < cout; ++c)
                for (std::size_t d = 0; d < cin; ++d)
                    y[c * n + i] += w[(e * cout + c) * cin + d] * x[d * n + j];
            ++e;
        }
    return y;
}

Tensor relu_ref(Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::max(0.0, t[i]);
    return t;
}

Tensor pool_reference(const Tensor& x, const CoarseningMap& map) {
    const auto children = map.children();
    const std::size_t c = x.extent(0), nf = map.n_fine(), nc = map.n_coarse();
    Tensor y({c, nc});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < nc; ++p) {
            double best = -1e300;
            for (std::size_t kid : children[p]) best = std::max(best, x[ch * nf + kid]);
            y[ch * nc + p] = best;
        }
    return y;
}

Tensor unpool_reference(const Tensor& x, const CoarseningMap& map) {
    const std::size_t c = x.extent(0), nf = map.n_fine(), nc = map.n_coarse();
    Tensor y({c, nf});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t f = 0; f < nf; ++f) y[ch * nf + f] = x[ch * nc + map.assignment[f]];
    return y;
}

Tensor concat_ref(const Tensor& a, const Tensor& b) {
    std::vector<double> data = a.vec();
    data.insert(data.end(), b.vec().begin(), b.vec().end());
    return Tensor({a.extent(0) + b.extent(0), a.extent(1)}, std::move(data));
}

} // namespace

TEST_CASE("cnn_unet structure and zero behavior") {
    ModelConfig cfg;
    cfg.architecture = Architecture::CnnUnet;
    cfg.input_dofs = 512;
    cfg.dim = 2;
    cfg.grid_h = 8;
    cfg.grid_w = 32;
    cfg.channels = {16, 32, 64, 64};
    const CnnUnet model(cfg);

    SUBCASE("downpath halves exactly: 8x32 -> 4x16 -> 2x8 -> 1x4") {
        const auto shapes = model.downpath_shapes();
        REQUIRE(shapes.size() == 4);
        CHECK(shapes[0] == std::pair<std::size_t, std::size_t>{8, 32});
        CHECK(shapes[1] == std::pair<std::size_t, std::size_t>{4, 16});
        CHECK(shapes[2] == std::pair<std::size_t, std::size_t>{2, 8});
        CHECK(shapes[3] == std::pair<std::size_t, std::size_t>{1, 4});
    }
    SUBCASE("zero forces with zero biases give a zero displacement field") {
        Rng rng(5);
        ModelParameters params = model.init_parameters(rng); // biases init to zero
        Tape tape;
        TapeParams tp(tape, params, false);
        const Var out = model.forward(tape, tp, Tensor({512}));
        CHECK(out.shape() == std::vector<std::size_t>{2, 8, 32});
        for (std::size_t i = 0; i < out.value().size(); ++i) CHECK(out.value()[i] == 0.0);
    }
    SUBCASE("paper preset parameter count is within 5% of 4.8e6") {
        ModelConfig paper = cfg;
        paper.channels = {64, 128, 256, 256};
        const CnnUnet full(paper);
        const double count = static_cast<double>(full.parameter_count());
        CHECK(std::fabs(count - 4.8e6) / 4.8e6 < 0.05);
    }
    SUBCASE("encode/decode round trip") {
        Rng rng(6);
        const Tensor f = random_tensor(rng, {512});
        const Tensor back = model.decode_output(model.encode_input(f));
        for (std::size_t i = 0; i < 512; ++i) CHECK(back[i] == f[i]);
    }
    SUBCASE("non-grid mesh is refused with a config error") {
        const Mesh beam = build_beam_tet_mesh(3, 3, 3, 1.0, 1.0, 1.0);
        ModelConfig bad = cfg;
        bad.input_dofs = beam.n_dofs();
        CHECK_THROWS_AS(build_model(bad, beam), ConfigError);
    }
}

TEST_CASE("mag_layer examples") {
    Rng rng(11);
    SUBCASE("zero input leaves the bias") {
        const AdjacencyPattern adj = random_graph(rng, 5, 0.4);
        Tape tape;
        const Tensor b = random_tensor(rng, {3, 5});
        const Tensor y = mag_layer(tape.leaf(Tensor({2, 5})),
                                   tape.leaf(Tensor({adj.n_directed_edges(), 3, 2})),
                                   tape.leaf(b), adj)
                             .value();
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == b[i]);
    }
    SUBCASE("identity configuration on a self-loop-only graph") {
        const AdjacencyPattern adj = self_loop_graph(4);
        Tensor w({4, 2, 2}); // edge e = node i; W[e][c][d] = identity per node
        for (std::size_t e = 0; e < 4; ++e)
            for (std::size_t c = 0; c < 2; ++c) w[(e * 2 + c) * 2 + c] = 1.0;
        Tape tape;
        const Tensor x = random_tensor(rng, {2, 4});
        const Tensor y =
            mag_layer(tape.leaf(x), tape.leaf(w), tape.leaf(Tensor({2, 4})), adj).value();
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == x[i]);
    }
    SUBCASE("mismatched adjacency is a dimension error") {
        const AdjacencyPattern adj = random_graph(rng, 5, 0.4);
        Tape tape;
        CHECK_THROWS_AS(mag_layer(tape.leaf(Tensor({2, 4})),
                                  tape.leaf(Tensor({adj.n_directed_edges(), 3, 2})),
                                  tape.leaf(Tensor({3, 5})), adj),
                        DimensionError);
    }
    SUBCASE("random graph matches the triple-loop reference and finite differences") {
        const AdjacencyPattern adj = random_graph(rng, 6, 0.4);
        const std::size_t edges = adj.n_directed_edges();
        std::vector<Tensor> params{random_tensor(rng, {2, 6}), random_tensor(rng, {edges, 3, 2}),
                                   random_tensor(rng, {3, 6})};
        {
            Tape tape;
            const Tensor y = mag_layer(tape.leaf(params[0]), tape.leaf(params[1]),
                                       tape.leaf(params[2]), adj)
                                 .value();
            const Tensor ref = mag_reference(params[0], params[1], params[2], adj);
            for (std::size_t i = 0; i < y.size(); ++i)
                CHECK(std::fabs(y[i] - ref[i]) <= 1e-12);
        }
        const Tensor target = random_tensor(rng, {3, 6});
        auto eval = [&](const std::vector<Tensor>& p) {
            Tape tape;
            return mse_loss(mag_layer(tape.leaf(p[0], false), tape.leaf(p[1], false),
                                      tape.leaf(p[2], false), adj),
                            tape.leaf(target, false), 1)
                .value()[0];
        };
        auto grad = [&](const std::vector<Tensor>& p) {
            Tape tape;
            std::vector<Var> v{tape.leaf(p[0], true), tape.leaf(p[1], true),
                               tape.leaf(p[2], true)};
            Var loss = mse_loss(mag_layer(v[0], v[1], v[2], adj), tape.leaf(target, false), 1);
            tape.backward(loss);
            return std::vector<Tensor>{v[0].grad(), v[1].grad(), v[2].grad()};
        };
        CHECK(finite_diff_check(eval, grad, params).max_rel_err < 1e-6);
    }
}

TEST_CASE("graph pool/unpool examples") {
    Rng rng(13);
    CoarseningMap map;
    map.assignment = {0, 0, 1, 1, 2};
    map.seeds = {0, 2, 4};

    SUBCASE("children (1,5,3) pool to 5; singletons are the identity") {
        CoarseningMap one;
        one.assignment = {0, 0, 0};
        one.seeds = {0};
        Tape tape;
        CHECK(graph_pool(tape.leaf(Tensor({1, 3}, {1.0, 5.0, 3.0})), one).value()[0] == 5.0);

        CoarseningMap singletons;
        singletons.assignment = {0, 1, 2};
        singletons.seeds = {0, 1, 2};
        const Tensor x = random_tensor(rng, {2, 3});
        const Tensor y = graph_pool(tape.leaf(x), singletons).value();
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
        const Tensor z = graph_unpool(tape.leaf(x), singletons).value();
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(z[i] == x[i]);
    }
    SUBCASE("random tensor equals the brute-force partition max") {
        Tape tape;
        const Tensor x = random_tensor(rng, {3, 5});
        const Tensor y = graph_pool(tape.leaf(x), map).value();
        const Tensor ref = pool_reference(x, map);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == ref[i]);
    }
    SUBCASE("unpool copies parents; pool-unpool preserves constants") {
        Tape tape;
        const Tensor x = random_tensor(rng, {2, 3});
        const Tensor y = graph_unpool(tape.leaf(x), map).value();
        for (std::size_t ch = 0; ch < 2; ++ch)
            for (std::size_t f = 0; f < 5; ++f)
                CHECK(y[ch * 5 + f] == x[ch * 3 + map.assignment[f]]);

        Var c = tape.leaf(Tensor::full({2, 5}, 1.5));
        const Tensor rt = graph_unpool(graph_pool(c, map), map).value();
        for (std::size_t i = 0; i < rt.size(); ++i) CHECK(rt[i] == 1.5);
    }
    SUBCASE("pool ties resolve to the smallest child index") {
        Tape tape;
        Var x = tape.leaf(Tensor::full({1, 5}, 2.0), true);
        Var pooled = graph_pool(x, map);
        Var loss = mse_loss(pooled, tape.leaf(Tensor({1, 3})), 1);
        tape.backward(loss);
        const Tensor& g = x.grad();
        CHECK(g[0] != 0.0);
        CHECK(g[1] == 0.0);
        CHECK(g[2] != 0.0);
        CHECK(g[3] == 0.0);
        CHECK(g[4] != 0.0);
    }
}

TEST_CASE("magnet forward") {
    const Mesh grid = build_grid_mesh(3, 4, 1.0, 1.5, true);
    ModelConfig cfg;
    cfg.architecture = Architecture::Magnet;
    cfg.input_dofs = grid.n_dofs();
    cfg.dim = 2;
    cfg.channels = {2, 3};
    cfg.adjacency_power = 2;
    auto model = build_model(cfg, grid);
    auto* net = dynamic_cast<MagnetNet*>(model.get());
    REQUIRE(net != nullptr);

    SUBCASE("zero input with zero biases gives zero output") {
        Rng rng(17);
        ModelParameters params = model->init_parameters(rng);
        Tape tape;
        TapeParams tp(tape, params, false);
        const Var out = model->forward(tape, tp, Tensor({grid.n_dofs()}));
        CHECK(out.shape() == std::vector<std::size_t>{2, grid.n_nodes()});
        for (std::size_t i = 0; i < out.value().size(); ++i) CHECK(out.value()[i] == 0.0);
    }
    SUBCASE("composition of verified layer oracles reproduces the forward pass") {
        Rng rng(19);
        ModelParameters params = model->init_parameters(rng);
        const Tensor f = random_tensor(rng, {grid.n_dofs()});
        Tape tape;
        TapeParams tp(tape, params, false);
        const Tensor y = model->forward(tape, tp, f).value();

        const auto& h = net->hierarchy();
        const Tensor x0 = net->encode_target(f);
        Tensor d0 = relu_ref(mag_reference(x0, params.at("mag.d0.m0.w"), params.at("mag.d0.m0.b"),
                                           h.mag_patterns[0]));
        d0 = relu_ref(
            mag_reference(d0, params.at("mag.d0.m1.w"), params.at("mag.d0.m1.b"), h.mag_patterns[0]));
        Tensor d1 = pool_reference(d0, h.maps[0]);
        d1 = relu_ref(
            mag_reference(d1, params.at("mag.d1.m0.w"), params.at("mag.d1.m0.b"), h.mag_patterns[1]));
        d1 = relu_ref(
            mag_reference(d1, params.at("mag.d1.m1.w"), params.at("mag.d1.m1.b"), h.mag_patterns[1]));
        Tensor u0 = concat_ref(unpool_reference(d1, h.maps[0]), d0);
        u0 = relu_ref(
            mag_reference(u0, params.at("mag.u0.m0.w"), params.at("mag.u0.m0.b"), h.mag_patterns[0]));
        u0 = relu_ref(
            mag_reference(u0, params.at("mag.u0.m1.w"), params.at("mag.u0.m1.b"), h.mag_patterns[0]));
        const Tensor ref =
            mag_reference(u0, params.at("mag.head.w"), params.at("mag.head.b"), h.mag_patterns[0]);
        REQUIRE(y.shape() == ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-13));
    }
    SUBCASE("loss gradient matches finite differences on the toy config") {
        Rng rng(23);
        ModelParameters params = testing::random_fd_point(*model, rng);
        const Tensor f = random_tensor(rng, {grid.n_dofs()}, -0.8, 0.8);
        const Tensor u = random_tensor(rng, {grid.n_dofs()}, -0.8, 0.8);
        CHECK(testing::model_fd_check(*model, params, f, u).max_rel_err < 1e-6);
    }
}

TEST_CASE("MAg permutation equivariance") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + rng.below(6);
        const AdjacencyPattern adj = random_graph(rng, n, 0.45);
        const std::size_t edges = adj.n_directed_edges();
        const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3);
        const Tensor x = random_tensor(rng, {cin, n});
        const Tensor w = random_tensor(rng, {edges, cout, cin});
        const Tensor b = random_tensor(rng, {cout, n});

        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

        AdjacencyPattern padj;
        padj.n_nodes = n;
        padj.neighbors.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : adj.neighbors[i]) padj.neighbors[perm[i]].push_back(perm[j]);
        for (auto& nb : padj.neighbors) std::sort(nb.begin(), nb.end());

        std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
        std::size_t e = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : adj.neighbors[i]) edge_of[{i, j}] = e++;

        std::vector<std::size_t> inv(n);
        for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;

        Tensor pw({edges, cout, cin});
        std::size_t pe = 0;
        for (std::size_t ip = 0; ip < n; ++ip)
            for (std::size_t jp : padj.neighbors[ip]) {
                const std::size_t orig = edge_of.at({inv[ip], inv[jp]});
                for (std::size_t c = 0; c < cout; ++c)
                    for (std::size_t d = 0; d < cin; ++d)
                        pw[(pe * cout + c) * cin + d] = w[(orig * cout + c) * cin + d];
                ++pe;
            }
        Tensor px({cin, n}), pb({cout, n});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < cin; ++d) px[d * n + perm[i]] = x[d * n + i];
            for (std::size_t c = 0; c < cout; ++c) pb[c * n + perm[i]] = b[c * n + i];
        }

        Tape tape;
        const Tensor y = mag_layer(tape.leaf(x), tape.leaf(w), tape.leaf(b), adj).value();
        const Tensor py = mag_layer(tape.leaf(px), tape.leaf(pw), tape.leaf(pb), padj).value();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < cout; ++c)
                CHECK(std::fabs(py[c * n + perm[i]] - y[c * n + i]) <= 1e-12);
    }
}

TEST_CASE("attention block") {
    Rng rng(31);
    const std::size_t dq = 8, dkv = 6;
    ModelParameters values;
    for (const auto& s : attention_param_specs("att.", dq, dkv, true)) {
        Tensor t = s.init == InitKind::One ? Tensor::full(s.shape, 1.0)
                                           : random_tensor(rng, s.shape, -0.5, 0.5);
        values[s.name] = std::move(t);
    }

    SUBCASE("output keeps the query shape for any kv count") {
        for (std::size_t nkv : {std::size_t{1}, std::size_t{4}, std::size_t{9}}) {
            Tape tape;
            TapeParams tp(tape, values, false);
            Var q = tape.leaf(random_tensor(rng, {3, dq}), false);
            Var kv = tape.leaf(random_tensor(rng, {nkv, dkv}), false);
            const Var out = attention_block(tp, "att.", q, kv, 2, true);
            CHECK(out.shape() == std::vector<std::size_t>{3, dq});
        }
    }
    SUBCASE("single key reduces to a weight-one aggregation of its value") {
        // with one kv row the softmax weight is exactly 1, so the key
        // projection cannot influence the output
        const Tensor q = random_tensor(rng, {3, dq});
        const Tensor kv = random_tensor(rng, {1, dkv});
        auto run = [&](const ModelParameters& v) {
            Tape tape;
            TapeParams tp(tape, v, false);
            return attention_block(tp, "att.", tape.leaf(q, false), tape.leaf(kv, false), 2, true)
                .value();
        };
        const Tensor y1 = run(values);
        ModelParameters tweaked = values;
        for (std::size_t i = 0; i < tweaked["att.wk"].size(); ++i) tweaked["att.wk"][i] += 0.37;
        const Tensor y2 = run(tweaked);
        for (std::size_t i = 0; i < y1.size(); ++i)
            CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    }
    SUBCASE("head count must divide the query dim") {
        Tape tape;
        TapeParams tp(tape, values, false);
        Var q = tape.leaf(random_tensor(rng, {3, dq}), false);
        Var kv = tape.leaf(random_tensor(rng, {4, dkv}), false);
        CHECK_THROWS_AS(attention_block(tp, "att.", q, kv, 3, true), ConfigError);
    }
    SUBCASE("projection gradients match finite differences on a 3x8 / 5x8 toy") {
        ModelParameters fd = values;
        fd["in.q"] = random_tensor(rng, {3, dq});
        fd["in.kv"] = random_tensor(rng, {5, dkv});
        const Tensor target = random_tensor(rng, {3, dq});
        std::vector<std::string> names;
        std::vector<Tensor> flat;
        for (const auto& [name, t] : fd) {
            names.push_back(name);
            flat.push_back(t);
        }
        auto rebuild = [&](const std::vector<Tensor>& p) {
            ModelParameters out;
            for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = p[i];
            return out;
        };
        auto eval = [&](const std::vector<Tensor>& p) {
            const ModelParameters v = rebuild(p);
            Tape tape;
            TapeParams tp(tape, v, false);
            Var out = attention_block(tp, "att.", tp["in.q"], tp["in.kv"], 2, true);
            return mse_loss(out, tape.leaf(target, false), 1).value()[0];
        };
        auto grad = [&](const std::vector<Tensor>& p) {
            const ModelParameters v = rebuild(p);
            Tape tape;
            TapeParams tp(tape, v, true);
            Var out = attention_block(tp, "att.", tp["in.q"], tp["in.kv"], 2, true);
            Var loss = mse_loss(out, tape.leaf(target, false), 1);
            tape.backward(loss);
            std::vector<Tensor> g;
            for (const auto& [name, var] : tp.vars()) g.push_back(var.grad());
            return g;
        };
        CHECK(finite_diff_check(eval, grad, flat, 1e-5).max_rel_err < 1e-6);
    }
}

TEST_CASE("perceiver") {
    ModelConfig cfg;
    cfg.architecture = Architecture::PerceiverIo;
    cfg.input_dofs = 8;
    cfg.dim = 2;
    cfg.latent_count = 4;
    cfg.latent_dim = 8;
    cfg.blocks = 1;
    cfg.self_layers_per_block = 1;
    cfg.cross_heads = 2;
    cfg.self_heads = 2;
    cfg.embed_channels = 4;
    auto model = build_model(cfg);
    auto* net = dynamic_cast<PerceiverNet*>(model.get());
    REQUIRE(net != nullptr);

    SUBCASE("embedding splits into projection bias and positional blocks at f = 0") {
        Rng rng(37);
        ModelParameters params = model->init_parameters(rng);
        Tape tape;
        TapeParams tp(tape, params, false);
        const Tensor e = net->embed(tape, tp, Tensor({8})).value();
        CHECK(e.shape() == std::vector<std::size_t>{8, 8});
        const Tensor& bias = params.at("pcv.embed.b");
        const Tensor& pos = params.at("pcv.pos_embed");
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t c = 0; c < 4; ++c) {
                CHECK(e[i * 8 + c] == bias[c]);
                CHECK(e[i * 8 + 4 + c] == pos[i * 4 + c]);
            }
    }
    SUBCASE("latent shape is fixed by the config, not the input size") {
        Rng rng(41);
        ModelParameters params = model->init_parameters(rng);
        Tape tape;
        TapeParams tp(tape, params, false);
        PerceiverNet::Trace trace;
        const Var out = net->forward_traced(tape, tp, Tensor({8}), &trace);
        CHECK(trace.latent_shape == std::vector<std::size_t>{4, 8});
        CHECK(trace.embed_shape == std::vector<std::size_t>{8, 8});
        CHECK(out.shape() == std::vector<std::size_t>{8});
    }
    SUBCASE("zero-initialized head gives a zero output vector") {
        Rng rng(43);
        ModelParameters params = model->init_parameters(rng);
        params["pcv.head.w"].fill(0.0);
        params["pcv.head.b"].fill(0.0);
        const Tensor u = model->predict(params, Tensor({8}));
        CHECK(u.size() == 8);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == 0.0);
    }
    SUBCASE("end-to-end gradients match finite differences on the miniature config") {
        Rng rng(47);
        ModelParameters params = testing::random_fd_point(*model, rng);
        const Tensor f = random_tensor(rng, {8}, -0.8, 0.8);
        const Tensor u = random_tensor(rng, {8}, -0.8, 0.8);
        CHECK(testing::model_fd_check(*model, params, f, u).max_rel_err < 1e-6);
    }
}

TEST_CASE("cnn gradient check on a miniature grid") {
    const Mesh grid = build_grid_mesh(4, 8, 1.0, 2.0, true);
    ModelConfig cfg;
    cfg.architecture = Architecture::CnnUnet;
    cfg.input_dofs = grid.n_dofs();
    cfg.dim = 2;
    cfg.grid_h = 4;
    cfg.grid_w = 8;
    cfg.channels = {2, 3};
    auto model = build_model(cfg, grid);
    Rng rng(53);
    ModelParameters params = testing::random_fd_point(*model, rng);
    const Tensor f = random_tensor(rng, {grid.n_dofs()}, -0.8, 0.8);
    const Tensor u = random_tensor(rng, {grid.n_dofs()}, -0.8, 0.8);
    CHECK(testing::model_fd_check(*model, params, f, u).max_rel_err < 1e-6);
}

TEST_CASE("forwards are deterministic") {
    const Mesh grid = build_grid_mesh(4, 8, 1.0, 2.0, true);
    Rng rng(59);
    const Tensor f = random_tensor(rng, {grid.n_dofs()});
    for (const char* arch : {"cnn_unet", "magnet", "perceiver_io"}) {
        ModelConfig cfg;
        cfg.architecture = architecture_from_name(arch);
        cfg.input_dofs = grid.n_dofs();
        cfg.dim = 2;
        cfg.grid_h = 4;
        cfg.grid_w = 8;
        cfg.channels = {2, 3};
        cfg.latent_count = 4;
        cfg.latent_dim = 8;
        cfg.blocks = 1;
        cfg.self_layers_per_block = 1;
        cfg.cross_heads = 2;
        cfg.self_heads = 2;
        cfg.embed_channels = 4;
        auto model = build_model(cfg, grid);
        Rng init(61);
        const ModelParameters params = model->init_parameters(init);
        const Tensor u1 = model->predict(params, f);
        const Tensor u2 = model->predict(params, f);
        for (std::size_t i = 0; i < u1.size(); ++i) CHECK(u1[i] == u2[i]);
    }
}
