#include "surromesh/presets.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace surromesh {

Mesh MeshSpec::build() const {
    if (kind == "grid") return build_grid_mesh(nx, ny, lx, ly, corner_fix);
    if (kind == "beam") return build_beam_tet_mesh(nx, ny, nz, lx, ly, lz);
    if (kind == "file") return load_mesh(path);
    throw ConfigError("mesh spec: unknown kind '" + kind + "'");
}

std::size_t train_count(std::size_t n_samples, double split) {
    return static_cast<std::size_t>(
        std::floor(split * static_cast<double>(n_samples) + 1e-9));
}

namespace {

// 2D benchmark geometry: 8x32-node sheet with square elements, corners
// pinned, traction on the short top edge. This extent puts the extreme
// sampled tractions near the published 0.35 m peak displacement for the
// Table 2 material.
constexpr double k2dLx = 1.0;
constexpr double k2dLy = 31.0 / 7.0;

TrainRunConfig base_train(OptimizerKind kind, std::size_t batch, std::size_t epochs,
                          std::uint64_t seed) {
    TrainRunConfig run;
    run.batch_size = batch;
    run.epochs = epochs;
    run.seed = seed;
    run.optimizer.kind = kind;
    run.optimizer.lr = 1e-4;
    return run;
}

ModelConfig perceiver_config(std::size_t dofs, int dim, std::size_t latents, std::size_t latent_dim,
                             std::size_t embed) {
    ModelConfig m;
    m.architecture = Architecture::PerceiverIo;
    m.input_dofs = dofs;
    m.dim = dim;
    m.latent_count = latents;
    m.latent_dim = latent_dim;
    m.blocks = 3;
    m.self_layers_per_block = 2;
    m.cross_heads = 2;
    m.self_heads = 2;
    m.embed_channels = embed;
    return m;
}

ExperimentConfig preset_2d(bool desk) {
    ExperimentConfig c;
    c.mesh = MeshSpec{"grid", 8, 32, 0, k2dLx, k2dLy, 0.0, true, ""};
    c.E = 100.0;
    c.nu = 0.3;
    c.seed = 2024;
    c.dataset.n_samples = desk ? 2100 : 7496;        // paper scale: 7124 + 372
    c.dataset.split = desk ? 2000.0 / 2100.0 : 7124.0 / 7496.0;
    c.dataset.seed = c.seed;
    c.dataset.region = grid_traction_region(8, 32);
    const std::size_t dofs = 512;

    ModelConfig cnn;
    cnn.architecture = Architecture::CnnUnet;
    cnn.input_dofs = dofs;
    cnn.dim = 2;
    cnn.grid_h = 8;
    cnn.grid_w = 32;
    cnn.channels = desk ? std::vector<std::size_t>{16, 32, 64, 64}
                        : std::vector<std::size_t>{64, 128, 256, 256};
    TrainRunConfig cnn_train = base_train(OptimizerKind::Adam, 16, desk ? 2000 : 32000, c.seed);

    ModelConfig mag;
    mag.architecture = Architecture::Magnet;
    mag.input_dofs = dofs;
    mag.dim = 2;
    mag.adjacency_power = 2;
    mag.channels = desk ? std::vector<std::size_t>{4, 8, 8, 16, 16}
                        : std::vector<std::size_t>{8, 16, 16, 32, 32};
    TrainRunConfig mag_train = base_train(OptimizerKind::Adam, 4, desk ? 2000 : 10000, c.seed);

    ModelConfig pcv = desk ? perceiver_config(dofs, 2, 32, 64, 32)
                           : perceiver_config(dofs, 2, 128, 210, 256);
    TrainRunConfig pcv_train = base_train(OptimizerKind::AdamW, 16, desk ? 2000 : 264140, c.seed);

    if (desk) {
        // Desk-scale learning rates and early-stop thresholds; see README.
        cnn_train.optimizer.lr = 1e-3;
        mag_train.optimizer.lr = 1e-3;
        pcv_train.optimizer.lr = 1e-3;
        cnn_train.target_loss = 5e-3;
        mag_train.target_loss = 5e-3;
        pcv_train.target_loss = 5e-3;
    }
    c.archs["cnn_unet"] = {cnn, cnn_train};
    c.archs["magnet"] = {mag, mag_train};
    c.archs["perceiver_io"] = {pcv, pcv_train};
    return c;
}

ExperimentConfig preset_3d(bool desk) {
    ExperimentConfig c;
    // 17x4x3-node cantilever tet beam: 204 nodes, 612 dofs.
    c.mesh = MeshSpec{"beam", 17, 4, 3, 0.0, 0.0, 0.0, true, ""};
    c.mesh.lx = 2.0;
    c.mesh.ly = 0.4;
    c.mesh.lz = 0.3;
    c.E = 3e6;
    c.nu = 0.4;
    c.seed = 2024;
    c.dataset.n_samples = desk ? 500 : 8000;          // paper scale: 7600 + 400
    c.dataset.split = 0.95;
    c.dataset.seed = c.seed;
    c.dataset.mass_density = 1.0;
    const std::size_t dofs = 17 * 4 * 3 * 3;

    ModelConfig mag;
    mag.architecture = Architecture::Magnet;
    mag.input_dofs = dofs;
    mag.dim = 3;
    mag.adjacency_power = 2;
    mag.channels = desk ? std::vector<std::size_t>{4, 8, 8, 16}
                        : std::vector<std::size_t>{6, 6, 6, 12, 12, 24, 24};
    TrainRunConfig mag_train = base_train(OptimizerKind::Adam, 4, desk ? 2000 : 1200, c.seed);

    ModelConfig pcv = desk ? perceiver_config(dofs, 3, 32, 64, 32)
                           : perceiver_config(dofs, 3, 128, 210, 256);
    TrainRunConfig pcv_train = base_train(OptimizerKind::AdamW, 16, desk ? 2000 : 32580, c.seed);

    if (desk) {
        mag_train.optimizer.lr = 1e-3;
        pcv_train.optimizer.lr = 1e-3;
    }
    c.archs["magnet"] = {mag, mag_train};
    c.archs["perceiver_io"] = {pcv, pcv_train};
    return c;
}

std::size_t scaled(std::size_t v, double s, std::size_t floor_at) {
    return std::max<std::size_t>(floor_at,
                                 static_cast<std::size_t>(std::llround(static_cast<double>(v) * s)));
}

} // namespace

ExperimentConfig preset_config(const std::string& name) {
    if (name == "2d-paper") return preset_2d(false);
    if (name == "2d-desk") return preset_2d(true);
    if (name == "3d-beam") return preset_3d(false);
    if (name == "3d-desk") return preset_3d(true);
    throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"2d-paper", "2d-desk", "3d-beam", "3d-desk"}; }

void apply_scale(ExperimentConfig& config, double scale) {
    if (scale <= 0.0 || scale > 1.0) throw ConfigError("--scale must be in (0, 1]");
    if (scale == 1.0) return;
    config.dataset.n_samples = scaled(config.dataset.n_samples, scale, 20);
    for (auto& [name, arch] : config.archs) {
        ModelConfig& m = arch.model;
        for (auto& ch : m.channels) ch = scaled(ch, scale, 1);
        if (m.architecture == Architecture::PerceiverIo) {
            m.latent_count = scaled(m.latent_count, scale, 2);
            const std::size_t heads = std::max(m.cross_heads, m.self_heads);
            m.latent_dim = ((scaled(m.latent_dim, scale, heads) + heads - 1) / heads) * heads;
            m.embed_channels = scaled(m.embed_channels, scale, 2);
        }
        arch.train.epochs = scaled(arch.train.epochs, scale, 1);
    }
}

nlohmann::json experiment_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["mesh"] = {{"kind", c.mesh.kind},   {"nx", c.mesh.nx}, {"ny", c.mesh.ny},
                 {"nz", c.mesh.nz},       {"lx", c.mesh.lx}, {"ly", c.mesh.ly},
                 {"lz", c.mesh.lz},       {"corner_fix", c.mesh.corner_fix},
                 {"path", c.mesh.path}};
    j["material"] = {{"E", c.E}, {"nu", c.nu}};
    j["dataset"] = {{"n_samples", c.dataset.n_samples},
                    {"split", c.dataset.split},
                    {"mass_density", c.dataset.mass_density},
                    {"adaptive_steps", c.dataset.adaptive_steps},
                    {"solver", {{"steps", c.dataset.solver.steps},
                                {"tol", c.dataset.solver.tol},
                                {"max_iter", c.dataset.solver.max_iter}}},
                    {"ranges", {{"fx", {c.dataset.traction.fx_min, c.dataset.traction.fx_max}},
                                {"fy", {c.dataset.traction.fy_min, c.dataset.traction.fy_max}},
                                {"bx", {c.dataset.body.bx_min, c.dataset.body.bx_max}},
                                {"bz", {c.dataset.body.bz_min, c.dataset.body.bz_max}}}},
                    {"region", c.dataset.region}};
    j["seed"] = c.seed;
    nlohmann::json archs;
    for (const auto& [name, arch] : c.archs)
        archs[name] = {{"model", model_config_to_json(arch.model)},
                       {"train", train_run_to_json(arch.train)}};
    j["archs"] = std::move(archs);
    return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        const auto& m = j.at("mesh");
        c.mesh.kind = m.at("kind").get<std::string>();
        c.mesh.nx = m.value("nx", std::size_t{0});
        c.mesh.ny = m.value("ny", std::size_t{0});
        c.mesh.nz = m.value("nz", std::size_t{0});
        c.mesh.lx = m.value("lx", 0.0);
        c.mesh.ly = m.value("ly", 0.0);
        c.mesh.lz = m.value("lz", 0.0);
        c.mesh.corner_fix = m.value("corner_fix", true);
        c.mesh.path = m.value("path", std::string{});
        c.E = j.at("material").at("E").get<double>();
        c.nu = j.at("material").at("nu").get<double>();
        const auto& d = j.at("dataset");
        c.dataset.n_samples = d.at("n_samples").get<std::size_t>();
        c.dataset.split = d.at("split").get<double>();
        c.dataset.mass_density = d.value("mass_density", 1.0);
        c.dataset.adaptive_steps = d.value("adaptive_steps", true);
        if (d.contains("solver")) {
            c.dataset.solver.steps = d.at("solver").value("steps", c.dataset.solver.steps);
            c.dataset.solver.tol = d.at("solver").value("tol", c.dataset.solver.tol);
            c.dataset.solver.max_iter = d.at("solver").value("max_iter", c.dataset.solver.max_iter);
        }
        if (d.contains("ranges")) {
            const auto& r = d.at("ranges");
            if (r.contains("fx")) {
                c.dataset.traction.fx_min = r.at("fx")[0].get<double>();
                c.dataset.traction.fx_max = r.at("fx")[1].get<double>();
            }
            if (r.contains("fy")) {
                c.dataset.traction.fy_min = r.at("fy")[0].get<double>();
                c.dataset.traction.fy_max = r.at("fy")[1].get<double>();
            }
            if (r.contains("bx")) {
                c.dataset.body.bx_min = r.at("bx")[0].get<double>();
                c.dataset.body.bx_max = r.at("bx")[1].get<double>();
            }
            if (r.contains("bz")) {
                c.dataset.body.bz_min = r.at("bz")[0].get<double>();
                c.dataset.body.bz_max = r.at("bz")[1].get<double>();
            }
        }
        if (d.contains("region")) c.dataset.region = d.at("region").get<std::vector<std::size_t>>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.dataset.seed = c.seed;
        if (j.contains("archs")) {
            for (const auto& [name, aj] : j.at("archs").items()) {
                ArchPreset arch;
                arch.model = model_config_from_json(aj.at("model"));
                arch.train = train_run_from_json(aj.at("train"));
                c.archs[name] = std::move(arch);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("experiment config json: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("experiment config json: ") + e.what());
    }
    return experiment_from_json(j);
}

} // namespace surromesh
