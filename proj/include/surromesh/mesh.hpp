#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/errors.hpp"

namespace surromesh {

// Finite element mesh: quad4 in 2D (plane strain) or tet4 in 3D. Both element
// types carry 4 node indices. Dof convention: dof = node * dim + axis; force
// and displacement vectors span all dofs, with fixed dofs pinned to zero.
struct Mesh {
    int dim = 2;
    std::vector<double> coords;                    // n_nodes * dim, row-major (meters)
    std::vector<std::array<std::size_t, 4>> elements;
    std::vector<std::size_t> fixed_dofs;           // sorted, unique

    std::size_t n_nodes() const { return coords.size() / static_cast<std::size_t>(dim); }
    std::size_t n_dofs() const { return coords.size(); }
    std::size_t n_free_dofs() const { return n_dofs() - fixed_dofs.size(); }

    double coord(std::size_t node, int axis) const { return coords[node * dim + axis]; }
    std::vector<bool> fixed_mask() const;

    // Validates index bounds, element degeneracy, and fixed dof ordering.
    void validate() const;
};

// Structured nx-by-ny node grid of quad4 elements spanning lx-by-ly meters.
// corner_fix pins both dofs of the four corner nodes.
Mesh build_grid_mesh(std::size_t nx, std::size_t ny, double lx, double ly, bool corner_fix);

// Structured tet beam: nx*ny*nz nodes spanning lx*ly*lz meters, every
// hexahedral cell split into six tetrahedra sharing the cell diagonal
// (Kuhn triangulation, conforming across cells). The x = 0 face is fixed.
Mesh build_beam_tet_mesh(std::size_t nx, std::size_t ny, std::size_t nz,
                         double lx, double ly, double lz);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);
void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

} // namespace surromesh
