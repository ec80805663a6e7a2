#include "surromesh/dataset.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace surromesh {

namespace {

static_assert(std::endian::native == std::endian::little,
              "dataset binaries are little-endian; big-endian hosts are unsupported");

nlohmann::json ranges_json(const Mesh& mesh, const DatasetConfig& c) {
    nlohmann::json j;
    if (mesh.dim == 2) {
        j["fx"] = {c.traction.fx_min, c.traction.fx_max};
        j["fy"] = {c.traction.fy_min, c.traction.fy_max};
        j["unit"] = "N/m";
    } else {
        j["bx"] = {c.body.bx_min, c.body.bx_max};
        j["by"] = {0.0, 0.0};
        j["bz"] = {c.body.bz_min, c.body.bz_max};
        j["unit"] = "N/kg";
    }
    return j;
}

std::size_t steps_for(const DatasetConfig& c, double rel_magnitude) {
    if (!c.adaptive_steps) return c.solver.steps;
    const auto steps = static_cast<std::size_t>(
        std::ceil(rel_magnitude * static_cast<double>(c.solver.steps)));
    return std::max<std::size_t>(1, std::min(c.solver.steps, steps));
}

void write_matrix(const std::string& path, const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    for (const auto& row : rows)
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!out) throw DataError("short write to " + path);
}

std::vector<std::vector<double>> read_matrix(const std::string& path, std::size_t rows,
                                             std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
    for (auto& row : out) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(cols * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(cols * sizeof(double)))
            throw FormatError("truncated binary file " + path);
    }
    return out;
}

} // namespace

Dataset generate_dataset(const Mesh& mesh, const Material& mat, const DatasetConfig& config) {
    if (config.n_samples < 1) throw ConfigError("generate_dataset: n_samples must be >= 1");
    if (config.split <= 0.0 || config.split > 1.0)
        throw ConfigError("generate_dataset: split must be in (0, 1]");
    if (mesh.dim == 2 && config.region.size() < 2)
        throw ConfigError("generate_dataset: 2D generation needs a traction region");

    const std::size_t n = config.n_samples;
    Dataset ds;
    ds.n_dofs = mesh.n_dofs();
    ds.forces.resize(n);
    ds.displacements.resize(n);

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> redraws{0};
    std::atomic<bool> aborted{false};
    std::string first_error; // set under failure
    std::mutex err_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || aborted.load()) break;
            // Per-sample substream: redraws stay inside the sample's own
            // stream, so thread scheduling never changes the dataset.
            Rng rng(mix_seed(config.seed, i));
            bool done = false;
            for (std::size_t attempt = 0; attempt <= config.max_redraws_per_sample; ++attempt) {
                LoadCase load = mesh.dim == 2
                                    ? sample_load_2d(rng, config.traction, mesh, config.region)
                                    : sample_body_load_3d(rng, config.body, mesh, config.mass_density);
                NewtonOptions opts = config.solver;
                opts.steps = steps_for(config, mesh.dim == 2
                                                   ? relative_load_magnitude(load, config.traction)
                                                   : relative_load_magnitude(load, config.body));
                try {
                    NewtonReport rep = newton_solve(mesh, mat, load, opts);
                    ds.forces[i] = std::move(load.forces);
                    ds.displacements[i] = std::move(rep.u);
                    done = true;
                    break;
                } catch (const SolverError&) {
                    redraws.fetch_add(1);
                }
            }
            if (!done) {
                std::lock_guard<std::mutex> lock(err_mutex);
                first_error = "generate_dataset: sample " + std::to_string(i) +
                               " failed after " + std::to_string(config.max_redraws_per_sample) +
                               " redraws";
                aborted.store(true);
            }
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, config.threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (aborted.load()) throw DataError(first_error);

    const std::size_t n_redraws = redraws.load();
    if (static_cast<double>(n_redraws) > 0.2 * static_cast<double>(n + n_redraws))
        throw DataError("generate_dataset: failure rate above 20% (" + std::to_string(n_redraws) +
                        " redraws for " + std::to_string(n) + " samples)");

    ds.n_train = static_cast<std::size_t>(std::floor(config.split * static_cast<double>(n)));
    ds.n_test = n - ds.n_train;

    nlohmann::json manifest;
    manifest["format"] = {{"dtype", "float64"},
                          {"endianness", "little"},
                          {"layout", "row-major (n_samples, n_dofs)"}};
    manifest["mesh"] = mesh_to_json(mesh);
    manifest["material"] = {{"E", mat.E}, {"nu", mat.nu}, {"mu", mat.mu}, {"lambda", mat.lambda}};
    manifest["ranges"] = ranges_json(mesh, config);
    manifest["mass_density"] = config.mass_density;
    manifest["seed"] = config.seed;
    manifest["split"] = config.split;
    manifest["n_samples"] = n;
    manifest["n_train"] = ds.n_train;
    manifest["n_test"] = ds.n_test;
    manifest["n_dofs"] = ds.n_dofs;
    manifest["redraws"] = n_redraws;
    manifest["solver"] = {{"steps", config.solver.steps},
                          {"tol", config.solver.tol},
                          {"max_iter", config.solver.max_iter},
                          {"adaptive_steps", config.adaptive_steps}};
    if (mesh.dim == 2) manifest["region"] = config.region;
    ds.manifest_json = manifest.dump(2);
    return ds;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        if (!out) throw DataError("cannot open manifest.json in " + dir);
        out << dataset.manifest_json << "\n";
    }
    write_matrix((fs::path(dir) / "forces.bin").string(), dataset.forces);
    write_matrix((fs::path(dir) / "displacements.bin").string(), dataset.displacements);
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw DataError("missing manifest.json in " + dir);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    Dataset ds;
    try {
        ds.n_dofs = manifest.at("n_dofs").get<std::size_t>();
        ds.n_train = manifest.at("n_train").get<std::size_t>();
        ds.n_test = manifest.at("n_test").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    const std::size_t n = ds.n_train + ds.n_test;
    ds.forces = read_matrix((fs::path(dir) / "forces.bin").string(), n, ds.n_dofs);
    ds.displacements = read_matrix((fs::path(dir) / "displacements.bin").string(), n, ds.n_dofs);
    ds.manifest_json = manifest.dump(2);
    return ds;
}

Mesh dataset_mesh(const Dataset& dataset) {
    return mesh_from_json(nlohmann::json::parse(dataset.manifest_json).at("mesh"));
}

Material dataset_material(const Dataset& dataset) {
    const auto j = nlohmann::json::parse(dataset.manifest_json).at("material");
    return material_from_E_nu(j.at("E").get<double>(), j.at("nu").get<double>());
}

double verify_dataset_equilibrium(const Mesh& mesh, const Material& mat, const Dataset& dataset) {
    const auto dof_map = free_dof_map(mesh);
    double worst = 0.0;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const System sys = assemble(mesh, mat, dataset.displacements[s]);
        double rn2 = 0.0, fn2 = 0.0;
        for (std::size_t d = 0; d < mesh.n_dofs(); ++d) {
            if (dof_map[d] < 0) continue;
            const double f = dataset.forces[s][d];
            const double r = f - sys.f_int[static_cast<Eigen::Index>(d)];
            rn2 += r * r;
            fn2 += f * f;
        }
        const double ratio = std::sqrt(rn2) / std::max(1.0, std::sqrt(fn2));
        worst = std::max(worst, ratio);
    }
    return worst;
}

} // namespace surromesh
