#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "surromesh/checkpoint.hpp"
#include "surromesh/train.hpp"

using namespace surromesh;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

std::unique_ptr<Model> toy_model(const Mesh& grid) {
    ModelConfig cfg;
    cfg.architecture = Architecture::Magnet;
    cfg.input_dofs = grid.n_dofs();
    cfg.dim = 2;
    cfg.channels = {2, 3};
    cfg.adjacency_power = 2;
    return build_model(cfg, grid);
}

Dataset toy_dataset(const Mesh& grid, std::size_t n, std::size_t n_test, std::uint64_t seed) {
    Dataset ds;
    ds.n_dofs = grid.n_dofs();
    ds.n_train = n - n_test;
    ds.n_test = n_test;
    ds.manifest_json = "{}";
    Rng rng(seed);
    for (std::size_t s = 0; s < n; ++s) {
        ds.forces.push_back(random_tensor(rng, {ds.n_dofs}).vec());
        ds.displacements.push_back(random_tensor(rng, {ds.n_dofs}, -0.2, 0.2).vec());
    }
    return ds;
}

} // namespace

TEST_CASE("adam_step examples") {
    SUBCASE("zero gradients leave parameters unchanged and increment t") {
        OptimizerConfig cfg;
        Optimizer opt(cfg);
        ModelParameters params;
        params["w"] = Tensor({2}, {1.0, -2.0});
        std::map<std::string, Tensor> grads;
        grads["w"] = Tensor({2});
        opt.step(params, grads);
        CHECK(opt.step_count() == 1);
        CHECK(params["w"][0] == 1.0);
        CHECK(params["w"][1] == -2.0);
    }
    SUBCASE("unit gradient at t=1 moves by about -lr") {
        OptimizerConfig cfg;
        cfg.lr = 1e-4;
        Optimizer opt(cfg);
        ModelParameters params;
        params["w"] = Tensor::scalar(0.0);
        std::map<std::string, Tensor> grads;
        grads["w"] = Tensor::scalar(1.0);
        opt.step(params, grads);
        // bias correction makes mhat/sqrt(vhat) = 1 up to eps
        CHECK(params["w"][0] == doctest::Approx(-1e-4).epsilon(1e-7));
    }
    SUBCASE("two identical runs give bit-identical trajectories") {
        auto run = [] {
            OptimizerConfig cfg;
            cfg.lr = 1e-3;
            Optimizer opt(cfg);
            ModelParameters params;
            params["w"] = Tensor({3}, {0.5, -0.5, 1.0});
            Rng rng(7);
            for (int step = 0; step < 20; ++step) {
                std::map<std::string, Tensor> grads;
                grads["w"] = random_tensor(rng, {3});
                opt.step(params, grads);
            }
            return params["w"];
        };
        const Tensor a = run();
        const Tensor b = run();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    SUBCASE("non-finite gradient names the parameter") {
        Optimizer opt(OptimizerConfig{});
        ModelParameters params;
        params["w.bad"] = Tensor::scalar(0.0);
        std::map<std::string, Tensor> grads;
        grads["w.bad"] = Tensor::scalar(std::nan(""));
        CHECK_THROWS_WITH_AS(opt.step(params, grads), doctest::Contains("w.bad"), TrainingError);
    }
}

TEST_CASE("adamw_step examples") {
    SUBCASE("zero weight decay reduces to adam") {
        OptimizerConfig adam_cfg;
        adam_cfg.lr = 1e-3;
        OptimizerConfig adamw_cfg = adam_cfg;
        adamw_cfg.kind = OptimizerKind::AdamW;
        adamw_cfg.weight_decay = 0.0;
        Optimizer a(adam_cfg), w(adamw_cfg);
        ModelParameters pa, pw;
        pa["x.w"] = Tensor({2}, {0.3, -0.4});
        pw["x.w"] = Tensor({2}, {0.3, -0.4});
        Rng rng(11);
        for (int step = 0; step < 10; ++step) {
            std::map<std::string, Tensor> grads;
            grads["x.w"] = random_tensor(rng, {2});
            std::map<std::string, Tensor> grads_copy = grads;
            a.step(pa, grads);
            w.step(pw, grads_copy);
        }
        for (std::size_t i = 0; i < 2; ++i) CHECK(pa["x.w"][i] == pw["x.w"][i]);
    }
    SUBCASE("zero gradients with decay d scale decayed params by (1 - lr d)") {
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::AdamW;
        cfg.lr = 1e-2;
        cfg.weight_decay = 0.5;
        Optimizer opt(cfg);
        ModelParameters params;
        params["layer.w"] = Tensor::scalar(2.0);
        params["layer.b"] = Tensor::scalar(2.0);
        params["pcv.pos_embed"] = Tensor::scalar(2.0);
        std::map<std::string, Tensor> grads;
        grads["layer.w"] = Tensor::scalar(0.0);
        grads["layer.b"] = Tensor::scalar(0.0);
        grads["pcv.pos_embed"] = Tensor::scalar(0.0);
        opt.step(params, grads);
        CHECK(params["layer.w"][0] == doctest::Approx(2.0 * (1.0 - 1e-2 * 0.5)).epsilon(1e-15));
        CHECK(params["layer.b"][0] == 2.0);        // biases never decay
        CHECK(params["pcv.pos_embed"][0] == 2.0);  // embeddings never decay
    }
    SUBCASE("decay exclusion name filter") {
        CHECK(weight_decay_excluded("cnn.d0.c0.b"));
        CHECK(weight_decay_excluded("att.bq"));
        CHECK(weight_decay_excluded("att.mlp.b1"));
        CHECK(weight_decay_excluded("att.ln_q.g"));
        CHECK(weight_decay_excluded("att.ln_q.s"));
        CHECK(weight_decay_excluded("pcv.pos_embed"));
        CHECK(weight_decay_excluded("pcv.out_query"));
        CHECK(weight_decay_excluded("pcv.latents"));
        CHECK_FALSE(weight_decay_excluded("cnn.d0.c0.w"));
        CHECK_FALSE(weight_decay_excluded("att.wq"));
        CHECK_FALSE(weight_decay_excluded("att.mlp.w2"));
        CHECK_FALSE(weight_decay_excluded("pcv.embed.w"));
    }
}

TEST_CASE("train") {
    const Mesh grid = build_grid_mesh(3, 4, 1.0, 1.5, true);
    auto model = toy_model(grid);

    SUBCASE("single-pair memorization drives the loss below 1e-8") {
        Dataset ds = toy_dataset(grid, 1, 0, 3);
        Rng rng(5);
        ModelParameters params = model->init_parameters(rng);
        TrainRunConfig run;
        run.batch_size = 1;
        run.epochs = 4000;
        run.seed = 1;
        run.optimizer.lr = 3e-3;
        run.target_loss = 1e-9;
        const TrainResult result = train(*model, params, ds, run);
        CHECK(result.final_loss < 1e-8);
    }
    SUBCASE("zero-target dataset with a zero head keeps the loss at exactly zero") {
        Dataset ds = toy_dataset(grid, 4, 0, 7);
        for (auto& u : ds.displacements) std::fill(u.begin(), u.end(), 0.0);
        Rng rng(9);
        ModelParameters params = model->init_parameters(rng);
        params["mag.head.w"].fill(0.0);
        params["mag.head.b"].fill(0.0);
        TrainRunConfig run;
        run.batch_size = 2;
        run.epochs = 3;
        run.seed = 2;
        const TrainResult result = train(*model, params, ds, run);
        for (double l : result.loss_history) CHECK(l == 0.0);
    }
    SUBCASE("fixed seed reproduces the loss history bit-exactly") {
        Dataset ds = toy_dataset(grid, 6, 0, 13);
        TrainRunConfig run;
        run.batch_size = 2;
        run.epochs = 8;
        run.seed = 21;
        run.optimizer.lr = 1e-3;
        auto once = [&] {
            Rng rng(17);
            ModelParameters params = model->init_parameters(rng);
            return train(*model, params, ds, run).loss_history;
        };
        const auto h1 = once();
        const auto h2 = once();
        REQUIRE(h1.size() == h2.size());
        for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i] == h2[i]);
    }
    SUBCASE("resuming from a checkpoint continues the sequence identically") {
        Dataset ds = toy_dataset(grid, 6, 0, 19);
        TrainRunConfig run;
        run.batch_size = 2;
        run.epochs = 9;
        run.seed = 23;
        run.optimizer.lr = 1e-3;
        run.checkpoint_every = 4;

        Rng rng(29);
        const ModelParameters init = model->init_parameters(rng);

        ModelParameters full = init;
        const TrainResult uninterrupted = train(*model, full, ds, run);

        // capture state at epoch 4, then resume to epoch 9
        ModelParameters captured;
        TrainProgress captured_progress;
        Optimizer::State captured_state;
        bool have = false;
        auto hook = [&](const TrainProgress& p, const Optimizer::State& s, const ModelParameters& m,
                        const std::vector<double>&) {
            if (p.epochs_done == 4 && !have) {
                captured = m;
                captured_progress = p;
                captured_state = s;
                have = true;
            }
        };
        ModelParameters first = init;
        TrainRunConfig four = run;
        four.epochs = 4;
        train(*model, first, ds, four, nullptr, nullptr, hook);
        REQUIRE(have);

        ModelParameters resumed = captured;
        const TrainResult rest =
            train(*model, resumed, ds, run, &captured_progress, &captured_state);
        REQUIRE(rest.loss_history.size() == 5);
        for (std::size_t e = 4; e < 9; ++e)
            CHECK(rest.loss_history[e - 4] == uninterrupted.loss_history[e]);
        for (const auto& [name, t] : full) {
            const Tensor& r = resumed.at(name);
            for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == r[i]);
        }
    }
}

TEST_CASE("checkpoint io") {
    const Mesh grid = build_grid_mesh(3, 4, 1.0, 1.5, true);
    auto model = toy_model(grid);
    Rng rng(31);
    ModelParameters params = model->init_parameters(rng);

    Checkpoint ckpt;
    ckpt.model = model->config();
    ckpt.params = params;
    ckpt.optimizer.kind = OptimizerKind::AdamW;
    ckpt.optimizer.lr = 2e-4;
    ckpt.opt_state.t = 17;
    for (const auto& [name, t] : params) {
        ckpt.opt_state.m[name] = random_tensor(rng, t.shape());
        ckpt.opt_state.v[name] = random_tensor(rng, t.shape(), 0.0, 1.0);
    }
    ckpt.progress.epochs_done = 5;
    ckpt.progress.lr = 1e-4;
    ckpt.progress.best_loss = 0.125;

    const std::string path = "/tmp/surromesh_test.ckpt";
    save_checkpoint(ckpt, path);

    SUBCASE("round trip is bitwise exact") {
        const Checkpoint back = load_checkpoint(path);
        CHECK(back.model.channels == ckpt.model.channels);
        CHECK(back.optimizer.kind == OptimizerKind::AdamW);
        CHECK(back.optimizer.lr == 2e-4);
        CHECK(back.opt_state.t == 17);
        CHECK(back.progress.epochs_done == 5);
        CHECK(back.progress.best_loss == 0.125);
        REQUIRE(back.params.size() == params.size());
        for (const auto& [name, t] : params) {
            const Tensor& r = back.params.at(name);
            REQUIRE(r.shape() == t.shape());
            for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == r[i]);
        }
        for (const auto& [name, t] : ckpt.opt_state.m) {
            const Tensor& r = back.opt_state.m.at(name);
            for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == r[i]);
        }
    }
    SUBCASE("truncated file is a format error") {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        const std::string cut = "/tmp/surromesh_test_cut.ckpt";
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(cut), FormatError);
    }
    SUBCASE("parameter shapes are validated against the model config") {
        Checkpoint bad = ckpt;
        bad.params["mag.head.b"] = Tensor({1, 1});
        const std::string bad_path = "/tmp/surromesh_test_bad.ckpt";
        save_checkpoint(bad, bad_path);
        const Checkpoint back = load_checkpoint(bad_path);
        CHECK_THROWS_AS(check_parameters(*model, back.params), ConfigError);
    }
}
