#include "surromesh/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace surromesh {

std::vector<bool> Mesh::fixed_mask() const {
    std::vector<bool> mask(n_dofs(), false);
    for (std::size_t d : fixed_dofs) mask[d] = true;
    return mask;
}

void Mesh::validate() const {
    if (dim != 2 && dim != 3) throw DataError("mesh: dim must be 2 or 3");
    if (coords.size() % static_cast<std::size_t>(dim) != 0)
        throw DataError("mesh: coords length not divisible by dim");
    const std::size_t n = n_nodes();
    for (const auto& e : elements) {
        for (std::size_t a = 0; a < 4; ++a) {
            if (e[a] >= n) throw DataError("mesh: element node index out of range");
            for (std::size_t b = a + 1; b < 4; ++b)
                if (e[a] == e[b]) throw DataError("mesh: degenerate element with repeated node");
        }
    }
    if (!std::is_sorted(fixed_dofs.begin(), fixed_dofs.end()))
        throw DataError("mesh: fixed_dofs must be sorted");
    for (std::size_t d : fixed_dofs)
        if (d >= n_dofs()) throw DataError("mesh: fixed dof out of range");
    if (std::adjacent_find(fixed_dofs.begin(), fixed_dofs.end()) != fixed_dofs.end())
        throw DataError("mesh: duplicate fixed dof");
}

Mesh build_grid_mesh(std::size_t nx, std::size_t ny, double lx, double ly, bool corner_fix) {
    if (nx < 2 || ny < 2) throw ConfigError("build_grid_mesh: nx, ny must be >= 2");
    Mesh mesh;
    mesh.dim = 2;
    mesh.coords.resize(nx * ny * 2);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const std::size_t node = iy * nx + ix;
            mesh.coords[node * 2 + 0] = lx * static_cast<double>(ix) / static_cast<double>(nx - 1);
            mesh.coords[node * 2 + 1] = ly * static_cast<double>(iy) / static_cast<double>(ny - 1);
        }
    }
    for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
        for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
            const std::size_t n00 = iy * nx + ix;
            // counter-clockwise for a positive Jacobian
            mesh.elements.push_back({n00, n00 + 1, n00 + 1 + nx, n00 + nx});
        }
    }
    if (corner_fix) {
        const std::size_t corners[4] = {0, nx - 1, (ny - 1) * nx, (ny - 1) * nx + nx - 1};
        for (std::size_t c : corners) {
            mesh.fixed_dofs.push_back(c * 2);
            mesh.fixed_dofs.push_back(c * 2 + 1);
        }
        std::sort(mesh.fixed_dofs.begin(), mesh.fixed_dofs.end());
    }
    mesh.validate();
    return mesh;
}

namespace {

double tet_volume6(const Mesh& m, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    double v1[3], v2[3], v3[3];
    for (int k = 0; k < 3; ++k) {
        v1[k] = m.coord(b, k) - m.coord(a, k);
        v2[k] = m.coord(c, k) - m.coord(a, k);
        v3[k] = m.coord(d, k) - m.coord(a, k);
    }
    return v1[0] * (v2[1] * v3[2] - v2[2] * v3[1]) - v1[1] * (v2[0] * v3[2] - v2[2] * v3[0]) +
           v1[2] * (v2[0] * v3[1] - v2[1] * v3[0]);
}

} // namespace

Mesh build_beam_tet_mesh(std::size_t nx, std::size_t ny, std::size_t nz,
                         double lx, double ly, double lz) {
    if (nx < 2 || ny < 2 || nz < 2) throw ConfigError("build_beam_tet_mesh: nx, ny, nz must be >= 2");
    Mesh mesh;
    mesh.dim = 3;
    mesh.coords.resize(nx * ny * nz * 3);
    auto node_id = [&](std::size_t ix, std::size_t iy, std::size_t iz) {
        return (iz * ny + iy) * nx + ix;
    };
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t iy = 0; iy < ny; ++iy)
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const std::size_t node = node_id(ix, iy, iz);
                mesh.coords[node * 3 + 0] = lx * static_cast<double>(ix) / static_cast<double>(nx - 1);
                mesh.coords[node * 3 + 1] = ly * static_cast<double>(iy) / static_cast<double>(ny - 1);
                mesh.coords[node * 3 + 2] = lz * static_cast<double>(iz) / static_cast<double>(nz - 1);
            }

    // Six tets per cell, all sharing the 0-7 diagonal (cell corner c = dx + 2dy + 4dz).
    static const std::size_t kTets[6][4] = {
        {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
    };
    for (std::size_t iz = 0; iz + 1 < nz; ++iz) {
        for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
            for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
                std::size_t corner[8];
                for (std::size_t d = 0; d < 8; ++d)
                    corner[d] = node_id(ix + (d & 1), iy + ((d >> 1) & 1), iz + ((d >> 2) & 1));
                for (const auto& t : kTets) {
                    std::array<std::size_t, 4> e = {corner[t[0]], corner[t[1]], corner[t[2]],
                                                    corner[t[3]]};
                    if (tet_volume6(mesh, e[0], e[1], e[2], e[3]) < 0.0) std::swap(e[1], e[2]);
                    mesh.elements.push_back(e);
                }
            }
        }
    }
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const std::size_t node = node_id(0, iy, iz);
            for (int axis = 0; axis < 3; ++axis) mesh.fixed_dofs.push_back(node * 3 + axis);
        }
    std::sort(mesh.fixed_dofs.begin(), mesh.fixed_dofs.end());
    mesh.validate();
    return mesh;
}

nlohmann::json mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["dim"] = mesh.dim;
    auto coords = nlohmann::json::array();
    for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
        auto row = nlohmann::json::array();
        for (int a = 0; a < mesh.dim; ++a) row.push_back(mesh.coord(n, a));
        coords.push_back(std::move(row));
    }
    j["coords"] = std::move(coords);
    auto elements = nlohmann::json::array();
    for (const auto& e : mesh.elements) elements.push_back({e[0], e[1], e[2], e[3]});
    j["elements"] = std::move(elements);
    j["fixed_dofs"] = mesh.fixed_dofs;
    return j;
}

Mesh mesh_from_json(const nlohmann::json& j) {
    Mesh mesh;
    try {
        mesh.dim = j.at("dim").get<int>();
        for (const auto& row : j.at("coords")) {
            if (static_cast<int>(row.size()) != mesh.dim)
                throw DataError("mesh json: coord row size does not match dim");
            for (const auto& v : row) mesh.coords.push_back(v.get<double>());
        }
        for (const auto& e : j.at("elements")) {
            if (e.size() != 4) throw DataError("mesh json: elements must have 4 nodes");
            mesh.elements.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(),
                                     e[2].get<std::size_t>(), e[3].get<std::size_t>()});
        }
        mesh.fixed_dofs = j.at("fixed_dofs").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("mesh json: ") + e.what());
    }
    std::sort(mesh.fixed_dofs.begin(), mesh.fixed_dofs.end());
    mesh.validate();
    return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << mesh_to_json(mesh).dump(2) << "\n";
}

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("mesh json: ") + e.what());
    }
    return mesh_from_json(j);
}

} // namespace surromesh
