#pragma once

#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/dataset.hpp"
#include "surromesh/mesh.hpp"
#include "surromesh/train.hpp"

namespace surromesh {

struct MeshSpec {
    std::string kind; // "grid" | "beam" | "file"
    std::size_t nx = 0, ny = 0, nz = 0;
    double lx = 0.0, ly = 0.0, lz = 0.0;
    bool corner_fix = true;
    std::string path;

    Mesh build() const;
};

struct ArchPreset {
    ModelConfig model;
    TrainRunConfig train;
};

// Full experiment description: mesh, material, dataset generation, and one
// model/training preset per architecture.
struct ExperimentConfig {
    MeshSpec mesh;
    double E = 0.0, nu = 0.0;
    DatasetConfig dataset;
    std::map<std::string, ArchPreset> archs; // keyed by architecture name
    std::uint64_t seed = 0;

    Material material() const { return material_from_E_nu(E, nu); }
};

// Built-in presets: "2d-paper" and "3d-beam" encode the published material,
// force ranges, dataset sizes, and architecture hyperparameters; "2d-desk"
// and "3d-desk" are the scaled-down configurations used by the acceptance
// runs. --scale shrinks channels/latents, epochs, and dataset size.
ExperimentConfig preset_config(const std::string& name);
void apply_scale(ExperimentConfig& config, double scale);
std::vector<std::string> preset_names();

nlohmann::json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

// floor(split * n) training samples, robust to representation error.
std::size_t train_count(std::size_t n_samples, double split);

} // namespace surromesh
