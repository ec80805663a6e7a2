#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "surromesh/mesh.hpp"
#include "surromesh/rng.hpp"

namespace surromesh {

// Raised when det(F) <= 0 at a quadrature point; the load stepper catches it
// and retries with a smaller increment.
struct InvertedElementError : Error {
    using Error::Error;
};

struct Material {
    double E = 0.0;      // Young's modulus (Pa)
    double nu = 0.0;     // Poisson ratio
    double mu = 0.0;     // Lame parameters (Pa)
    double lambda = 0.0;
};

std::pair<double, double> lame_from_E_nu(double E, double nu);
Material material_from_E_nu(double E, double nu);

// Internal force and consistent tangent of one element for the compressible
// Neo-Hookean energy W(F) = mu/2 (tr(F^T F) - d) - mu ln J + lambda/2 (ln J)^2,
// plane strain in 2D. Quad4 uses 2x2 Gauss quadrature, tet4 a single point.
struct ElementKernel {
    std::array<double, 12> f_int{};   // 4*dim entries used
    std::array<double, 144> tangent{}; // (4*dim)^2 entries used, row-major
    std::size_t n_dofs = 0;
};

ElementKernel element_force_tangent(const Mesh& mesh, std::size_t elem,
                                    const double* u_elem, const Material& mat);

// Total strain energy of the mesh at displacement u (test oracle for the
// force = dW/du identity).
double total_strain_energy(const Mesh& mesh, const Material& mat, const std::vector<double>& u);

// Global internal force (all dofs) and tangent reduced to free dofs.
struct System {
    Eigen::VectorXd f_int;
    Eigen::MatrixXd k_free;
};

System assemble(const Mesh& mesh, const Material& mat, const std::vector<double>& u);

// dof -> free index, or -1 for fixed dofs.
std::vector<std::ptrdiff_t> free_dof_map(const Mesh& mesh);

// External load: consistent nodal forces over all dofs (zero at fixed dofs)
// plus the sampled descriptor for manifests and diagnostics.
struct LoadCase {
    std::vector<double> forces;
    std::array<double, 3> density{0.0, 0.0, 0.0};
    std::vector<std::size_t> segment_nodes; // traction segment (2D), empty for body loads
};

struct NewtonOptions {
    std::size_t steps = 10;
    double tol = 1e-9;
    std::size_t max_iter = 25;
};

struct NewtonReport {
    std::vector<double> u;
    std::size_t newton_iterations = 0;           // linear solves, total
    std::size_t halvings = 0;
    std::vector<double> final_step_residuals;    // per-iteration norms of the last load step
    std::size_t load_steps_completed = 0;
};

// Incremental load stepping with Newton iterations per step. On an inverted
// element or non-convergence the current increment is halved, up to 6 times;
// then a SolverError carrying the last residual norm is thrown.
NewtonReport newton_solve(const Mesh& mesh, const Material& mat, const LoadCase& load,
                          const NewtonOptions& options);

// ---- Load sampling ----

struct TractionRanges2d {
    double fx_min = -24.0, fx_max = 24.0; // N/m
    double fy_min = -8.0, fy_max = 8.0;   // N/m
};

struct BodyRanges3d {
    double bx_min = -0.35, bx_max = 0.35; // N/kg
    double bz_min = -0.35, bz_max = 0.35; // N/kg
};

// Loadable boundary polyline of a grid mesh: the interior nodes of the top
// edge (y = ly), i.e. the short edge between the fixed corners, corners
// excluded so sampled forces never touch fixed dofs.
std::vector<std::size_t> grid_traction_region(std::size_t nx, std::size_t ny);

// Trapezoidal lumping of a constant line density over a node polyline.
// Returns forces on all dofs without masking.
std::vector<double> traction_nodal_forces(const Mesh& mesh,
                                          const std::vector<std::size_t>& segment,
                                          double fx, double fy);

// Volume lumping of a uniform body force density (per unit mass) with the
// given mass density. Returns forces on all dofs without masking.
std::vector<double> body_nodal_forces(const Mesh& mesh, const std::array<double, 3>& b,
                                      double mass_density);

// Random contiguous segment of the region polyline (start and length uniform,
// at least one element edge), densities uniform in the ranges. Forces at
// fixed dofs are zeroed.
LoadCase sample_load_2d(Rng& rng, const TractionRanges2d& ranges, const Mesh& mesh,
                        const std::vector<std::size_t>& region);

// Uniform (b_x, 0, b_z) body force draw, lumped over element volumes.
LoadCase sample_body_load_3d(Rng& rng, const BodyRanges3d& ranges, const Mesh& mesh,
                             double mass_density);

// Ratio of the sampled density magnitudes to the range maxima, in [0, 1];
// drives the adaptive load step count during dataset generation.
double relative_load_magnitude(const LoadCase& load, const TractionRanges2d& ranges);
double relative_load_magnitude(const LoadCase& load, const BodyRanges3d& ranges);

} // namespace surromesh
