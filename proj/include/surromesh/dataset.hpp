#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/fem.hpp"
#include "surromesh/mesh.hpp"

namespace surromesh {

struct DatasetConfig {
    std::size_t n_samples = 0;
    double split = 0.95; // train fraction
    std::uint64_t seed = 0;
    NewtonOptions solver;
    // Scale the load step count with the sampled magnitude (floor 1, cap
    // solver.steps), so light loads solve quickly and heavy loads step more.
    bool adaptive_steps = true;
    double mass_density = 1.0; // kg/m^3, 3D body loads
    TractionRanges2d traction; // 2D
    BodyRanges3d body;         // 3D
    std::vector<std::size_t> region; // 2D loadable polyline
    std::size_t threads = 1;
    std::size_t max_redraws_per_sample = 100;
};

// Force-displacement pairs in draw order; the first n_train rows are the
// training split.
struct Dataset {
    std::size_t n_dofs = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::vector<double>> forces;
    std::vector<std::vector<double>> displacements;
    std::string manifest_json; // serialized manifest

    std::size_t size() const { return forces.size(); }
};

Dataset generate_dataset(const Mesh& mesh, const Material& mat, const DatasetConfig& config);

// On-disk layout: <dir>/manifest.json plus forces.bin and displacements.bin,
// row-major little-endian float64 of shape (n_samples, n_dofs).
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

Mesh dataset_mesh(const Dataset& dataset);
Material dataset_material(const Dataset& dataset);

// Independent equilibrium check: max over samples of |f - f_int(u)| /
// max(1, |f|) over free dofs.
double verify_dataset_equilibrium(const Mesh& mesh, const Material& mat, const Dataset& dataset);

} // namespace surromesh
