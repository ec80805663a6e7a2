#include "surromesh/fem.hpp"

#include <algorithm>
#include <cmath>

namespace surromesh {

std::pair<double, double> lame_from_E_nu(double E, double nu) {
    if (E <= 0.0) throw MaterialError("material: E must be > 0");
    if (nu < 0.0 || nu >= 0.5) throw MaterialError("material: nu must be in [0, 0.5)");
    const double mu = E / (2.0 * (1.0 + nu));
    const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    return {mu, lambda};
}

Material material_from_E_nu(double E, double nu) {
    auto [mu, lambda] = lame_from_E_nu(E, nu);
    return Material{E, nu, mu, lambda};
}

namespace {

// Quadrature-point contribution shared by quad4 and tet4. gradN holds the
// reference gradients of the 4 shape functions, dV the weighted volume.
template <int DIM>
void accumulate_point(const double gradN[4][DIM], const double* u_elem, const Material& mat,
                      double dV, double* f_int, double* tangent) {
    double F[DIM][DIM];
    for (int i = 0; i < DIM; ++i)
        for (int j = 0; j < DIM; ++j) F[i][j] = (i == j) ? 1.0 : 0.0;
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < DIM; ++i)
            for (int j = 0; j < DIM; ++j) F[i][j] += u_elem[a * DIM + i] * gradN[a][j];

    double detF;
    double Finv[DIM][DIM];
    if constexpr (DIM == 2) {
        detF = F[0][0] * F[1][1] - F[0][1] * F[1][0];
        if (detF <= 0.0) throw InvertedElementError("element inverted: det(F) <= 0");
        const double inv = 1.0 / detF;
        Finv[0][0] = F[1][1] * inv;
        Finv[0][1] = -F[0][1] * inv;
        Finv[1][0] = -F[1][0] * inv;
        Finv[1][1] = F[0][0] * inv;
    } else {
        detF = F[0][0] * (F[1][1] * F[2][2] - F[1][2] * F[2][1]) -
               F[0][1] * (F[1][0] * F[2][2] - F[1][2] * F[2][0]) +
               F[0][2] * (F[1][0] * F[2][1] - F[1][1] * F[2][0]);
        if (detF <= 0.0) throw InvertedElementError("element inverted: det(F) <= 0");
        const double inv = 1.0 / detF;
        Finv[0][0] = (F[1][1] * F[2][2] - F[1][2] * F[2][1]) * inv;
        Finv[0][1] = (F[0][2] * F[2][1] - F[0][1] * F[2][2]) * inv;
        Finv[0][2] = (F[0][1] * F[1][2] - F[0][2] * F[1][1]) * inv;
        Finv[1][0] = (F[1][2] * F[2][0] - F[1][0] * F[2][2]) * inv;
        Finv[1][1] = (F[0][0] * F[2][2] - F[0][2] * F[2][0]) * inv;
        Finv[1][2] = (F[0][2] * F[1][0] - F[0][0] * F[1][2]) * inv;
        Finv[2][0] = (F[1][0] * F[2][1] - F[1][1] * F[2][0]) * inv;
        Finv[2][1] = (F[0][1] * F[2][0] - F[0][0] * F[2][1]) * inv;
        Finv[2][2] = (F[0][0] * F[1][1] - F[0][1] * F[1][0]) * inv;
    }
    const double logJ = std::log(detF);
    const double mu = mat.mu, lambda = mat.lambda;

    // P = mu (F - F^-T) + lambda ln J F^-T
    double P[DIM][DIM];
    for (int i = 0; i < DIM; ++i)
        for (int J = 0; J < DIM; ++J)
            P[i][J] = mu * (F[i][J] - Finv[J][i]) + lambda * logJ * Finv[J][i];

    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < DIM; ++i) {
            double acc = 0.0;
            for (int J = 0; J < DIM; ++J) acc += P[i][J] * gradN[a][J];
            f_int[a * DIM + i] += acc * dV;
        }

    // q_a = F^-T gradN_a; block(a,b) = mu (G_a . G_b) I
    //   + (mu - lambda lnJ) q_b q_a^T + lambda q_a q_b^T
    double q[4][DIM];
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < DIM; ++i) {
            double acc = 0.0;
            for (int J = 0; J < DIM; ++J) acc += Finv[J][i] * gradN[a][J];
            q[a][i] = acc;
        }
    const double c2 = mu - lambda * logJ;
    const int n = 4 * DIM;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            double gg = 0.0;
            for (int J = 0; J < DIM; ++J) gg += gradN[a][J] * gradN[b][J];
            for (int i = 0; i < DIM; ++i)
                for (int k = 0; k < DIM; ++k) {
                    double v = c2 * q[b][i] * q[a][k] + lambda * q[a][i] * q[b][k];
                    if (i == k) v += mu * gg;
                    tangent[(a * DIM + i) * n + (b * DIM + k)] += v * dV;
                }
        }
    }
}

template <int DIM>
double point_energy(const double gradN[4][DIM], const double* u_elem, const Material& mat,
                    double dV) {
    double F[DIM][DIM];
    for (int i = 0; i < DIM; ++i)
        for (int j = 0; j < DIM; ++j) F[i][j] = (i == j) ? 1.0 : 0.0;
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < DIM; ++i)
            for (int j = 0; j < DIM; ++j) F[i][j] += u_elem[a * DIM + i] * gradN[a][j];
    double detF, trC = 0.0;
    if constexpr (DIM == 2) {
        detF = F[0][0] * F[1][1] - F[0][1] * F[1][0];
    } else {
        detF = F[0][0] * (F[1][1] * F[2][2] - F[1][2] * F[2][1]) -
               F[0][1] * (F[1][0] * F[2][2] - F[1][2] * F[2][0]) +
               F[0][2] * (F[1][0] * F[2][1] - F[1][1] * F[2][0]);
    }
    if (detF <= 0.0) throw InvertedElementError("element inverted: det(F) <= 0");
    for (int i = 0; i < DIM; ++i)
        for (int j = 0; j < DIM; ++j) trC += F[i][j] * F[i][j];
    const double logJ = std::log(detF);
    const double W = 0.5 * mat.mu * (trC - DIM) - mat.mu * logJ + 0.5 * mat.lambda * logJ * logJ;
    return W * dV;
}

// Reference gradients and weighted volumes per quadrature point.
template <int DIM>
struct QuadraturePoint {
    double gradN[4][DIM];
    double dV;
};

void quad4_points(const Mesh& mesh, const std::array<std::size_t, 4>& e,
                  std::vector<QuadraturePoint<2>>& pts) {
    static const double xi_a[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double eta_a[4] = {-1.0, -1.0, 1.0, 1.0};
    const double g = 1.0 / std::sqrt(3.0);
    pts.clear();
    for (int qy = 0; qy < 2; ++qy) {
        for (int qx = 0; qx < 2; ++qx) {
            const double xi = (qx == 0 ? -g : g), eta = (qy == 0 ? -g : g);
            double dNdxi[4][2];
            for (int a = 0; a < 4; ++a) {
                dNdxi[a][0] = 0.25 * xi_a[a] * (1.0 + eta_a[a] * eta);
                dNdxi[a][1] = 0.25 * eta_a[a] * (1.0 + xi_a[a] * xi);
            }
            double J[2][2] = {{0, 0}, {0, 0}};
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) J[i][j] += mesh.coord(e[a], i) * dNdxi[a][j];
            const double detJ = J[0][0] * J[1][1] - J[0][1] * J[1][0];
            if (detJ <= 0.0) throw DataError("quad4: non-positive reference Jacobian");
            const double inv = 1.0 / detJ;
            const double Jinv[2][2] = {{J[1][1] * inv, -J[0][1] * inv},
                                       {-J[1][0] * inv, J[0][0] * inv}};
            QuadraturePoint<2> qp;
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i)
                    qp.gradN[a][i] = dNdxi[a][0] * Jinv[0][i] + dNdxi[a][1] * Jinv[1][i];
            qp.dV = detJ; // unit Gauss weights, unit thickness
            pts.push_back(qp);
        }
    }
}

void tet4_point(const Mesh& mesh, const std::array<std::size_t, 4>& e, QuadraturePoint<3>& qp) {
    static const double dNdxi[4][3] = {{-1, -1, -1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double J[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) J[i][j] += mesh.coord(e[a], i) * dNdxi[a][j];
    const double detJ = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                        J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                        J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
    if (detJ <= 0.0) throw DataError("tet4: non-positive reference Jacobian");
    const double inv = 1.0 / detJ;
    double Jinv[3][3];
    Jinv[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) * inv;
    Jinv[0][1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) * inv;
    Jinv[0][2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) * inv;
    Jinv[1][0] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) * inv;
    Jinv[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) * inv;
    Jinv[1][2] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) * inv;
    Jinv[2][0] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) * inv;
    Jinv[2][1] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) * inv;
    Jinv[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) * inv;
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < 3; ++i)
            qp.gradN[a][i] =
                dNdxi[a][0] * Jinv[0][i] + dNdxi[a][1] * Jinv[1][i] + dNdxi[a][2] * Jinv[2][i];
    qp.dV = detJ / 6.0; // reference tet volume 1/6
}

} // namespace

ElementKernel element_force_tangent(const Mesh& mesh, std::size_t elem, const double* u_elem,
                                    const Material& mat) {
    const auto& e = mesh.elements[elem];
    ElementKernel out;
    out.n_dofs = 4 * static_cast<std::size_t>(mesh.dim);
    if (mesh.dim == 2) {
        std::vector<QuadraturePoint<2>> pts;
        quad4_points(mesh, e, pts);
        for (const auto& qp : pts)
            accumulate_point<2>(qp.gradN, u_elem, mat, qp.dV, out.f_int.data(), out.tangent.data());
    } else {
        QuadraturePoint<3> qp;
        tet4_point(mesh, e, qp);
        accumulate_point<3>(qp.gradN, u_elem, mat, qp.dV, out.f_int.data(), out.tangent.data());
    }
    return out;
}

double total_strain_energy(const Mesh& mesh, const Material& mat, const std::vector<double>& u) {
    double energy = 0.0;
    const int dim = mesh.dim;
    std::vector<double> u_elem(4 * dim);
    for (const auto& e : mesh.elements) {
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < dim; ++i) u_elem[a * dim + i] = u[e[a] * dim + i];
        if (dim == 2) {
            std::vector<QuadraturePoint<2>> pts;
            quad4_points(mesh, e, pts);
            for (const auto& qp : pts) energy += point_energy<2>(qp.gradN, u_elem.data(), mat, qp.dV);
        } else {
            QuadraturePoint<3> qp;
            tet4_point(mesh, e, qp);
            energy += point_energy<3>(qp.gradN, u_elem.data(), mat, qp.dV);
        }
    }
    return energy;
}

std::vector<std::ptrdiff_t> free_dof_map(const Mesh& mesh) {
    std::vector<std::ptrdiff_t> map(mesh.n_dofs(), 0);
    for (std::size_t d : mesh.fixed_dofs) map[d] = -1;
    std::ptrdiff_t next = 0;
    for (std::size_t d = 0; d < map.size(); ++d)
        if (map[d] >= 0) map[d] = next++;
    return map;
}

System assemble(const Mesh& mesh, const Material& mat, const std::vector<double>& u) {
    if (u.size() != mesh.n_dofs()) throw DimensionError("assemble: u length does not match dof count");
    const int dim = mesh.dim;
    const auto dof_map = free_dof_map(mesh);
    System sys;
    sys.f_int = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.n_dofs()));
    const Eigen::Index nf = static_cast<Eigen::Index>(mesh.n_free_dofs());
    sys.k_free = Eigen::MatrixXd::Zero(nf, nf);

    std::vector<double> u_elem(4 * dim);
    std::vector<std::size_t> edofs(4 * dim);
    for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
        const auto& e = mesh.elements[el];
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < dim; ++i) {
                edofs[a * dim + i] = e[a] * dim + i;
                u_elem[a * dim + i] = u[e[a] * dim + i];
            }
        const ElementKernel kern = element_force_tangent(mesh, el, u_elem.data(), mat);
        const std::size_t n = kern.n_dofs;
        for (std::size_t r = 0; r < n; ++r) {
            sys.f_int[static_cast<Eigen::Index>(edofs[r])] += kern.f_int[r];
            const std::ptrdiff_t fr = dof_map[edofs[r]];
            if (fr < 0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                const std::ptrdiff_t fc = dof_map[edofs[c]];
                if (fc < 0) continue;
                sys.k_free(fr, fc) += kern.tangent[r * n + c];
            }
        }
    }
    return sys;
}

NewtonReport newton_solve(const Mesh& mesh, const Material& mat, const LoadCase& load,
                          const NewtonOptions& options) {
    if (options.steps < 1) throw ConfigError("newton_solve: steps must be >= 1");
    if (options.tol <= 0.0) throw ConfigError("newton_solve: tol must be > 0");
    if (load.forces.size() != mesh.n_dofs())
        throw DimensionError("newton_solve: load vector length does not match dof count");

    const auto dof_map = free_dof_map(mesh);
    const Eigen::Index nf = static_cast<Eigen::Index>(mesh.n_free_dofs());
    Eigen::VectorXd f_ext = Eigen::VectorXd::Zero(nf);
    for (std::size_t d = 0; d < load.forces.size(); ++d)
        if (dof_map[d] >= 0) f_ext[dof_map[d]] = load.forces[d];
    const double f_norm = f_ext.norm();

    NewtonReport report;
    report.u.assign(mesh.n_dofs(), 0.0);
    std::vector<double> u = report.u;

    double s_done = 0.0;
    double ds = 1.0 / static_cast<double>(options.steps);
    double last_residual = 0.0;
    while (s_done < 1.0 - 1e-14) {
        const double s = std::min(1.0, s_done + ds);
        std::vector<double> u_trial = u;
        std::vector<double> residuals;
        bool converged = false;
        bool inverted = false;
        for (std::size_t it = 0; it <= options.max_iter; ++it) {
            System sys;
            try {
                sys = assemble(mesh, mat, u_trial);
            } catch (const InvertedElementError&) {
                inverted = true;
                break;
            }
            Eigen::VectorXd r = s * f_ext;
            for (std::size_t d = 0; d < mesh.n_dofs(); ++d)
                if (dof_map[d] >= 0) r[dof_map[d]] -= sys.f_int[static_cast<Eigen::Index>(d)];
            const double rn = r.norm();
            residuals.push_back(rn);
            last_residual = rn;
            if (rn <= options.tol * std::max(1.0, s * f_norm)) {
                converged = true;
                break;
            }
            if (it == options.max_iter) break;
            const Eigen::VectorXd du = sys.k_free.partialPivLu().solve(r);
            for (std::size_t d = 0; d < mesh.n_dofs(); ++d)
                if (dof_map[d] >= 0) u_trial[d] += du[dof_map[d]];
            ++report.newton_iterations;
        }
        if (converged) {
            u = std::move(u_trial);
            s_done = s;
            ++report.load_steps_completed;
            report.final_step_residuals = std::move(residuals);
        } else {
            if (report.halvings >= 6)
                throw SolverError(std::string("newton_solve: no convergence after 6 increment halvings") +
                                  (inverted ? " (inverted element)" : "") + ", last residual norm " +
                                  std::to_string(last_residual));
            ++report.halvings;
            ds *= 0.5;
        }
    }
    report.u = std::move(u);
    return report;
}

std::vector<std::size_t> grid_traction_region(std::size_t nx, std::size_t ny) {
    if (nx < 4 || ny < 2) throw ConfigError("grid_traction_region: grid too small");
    std::vector<std::size_t> region;
    for (std::size_t ix = 1; ix + 1 < nx; ++ix) region.push_back((ny - 1) * nx + ix);
    return region;
}

std::vector<double> traction_nodal_forces(const Mesh& mesh, const std::vector<std::size_t>& segment,
                                          double fx, double fy) {
    if (mesh.dim != 2) throw ConfigError("traction_nodal_forces: 2D meshes only");
    if (segment.size() < 2) throw ConfigError("traction_nodal_forces: segment needs >= 2 nodes");
    std::vector<double> f(mesh.n_dofs(), 0.0);
    for (std::size_t k = 0; k + 1 < segment.size(); ++k) {
        const std::size_t a = segment[k], b = segment[k + 1];
        const double dx = mesh.coord(b, 0) - mesh.coord(a, 0);
        const double dy = mesh.coord(b, 1) - mesh.coord(a, 1);
        const double len = std::sqrt(dx * dx + dy * dy);
        f[a * 2 + 0] += 0.5 * fx * len;
        f[a * 2 + 1] += 0.5 * fy * len;
        f[b * 2 + 0] += 0.5 * fx * len;
        f[b * 2 + 1] += 0.5 * fy * len;
    }
    return f;
}

std::vector<double> body_nodal_forces(const Mesh& mesh, const std::array<double, 3>& b,
                                      double mass_density) {
    if (mesh.dim != 3) throw ConfigError("body_nodal_forces: 3D meshes only");
    std::vector<double> f(mesh.n_dofs(), 0.0);
    for (const auto& e : mesh.elements) {
        double v1[3], v2[3], v3[3];
        for (int k = 0; k < 3; ++k) {
            v1[k] = mesh.coord(e[1], k) - mesh.coord(e[0], k);
            v2[k] = mesh.coord(e[2], k) - mesh.coord(e[0], k);
            v3[k] = mesh.coord(e[3], k) - mesh.coord(e[0], k);
        }
        const double vol = (v1[0] * (v2[1] * v3[2] - v2[2] * v3[1]) -
                            v1[1] * (v2[0] * v3[2] - v2[2] * v3[0]) +
                            v1[2] * (v2[0] * v3[1] - v2[1] * v3[0])) /
                           6.0;
        const double w = mass_density * vol / 4.0;
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 3; ++i) f[e[a] * 3 + i] += w * b[static_cast<std::size_t>(i)];
    }
    return f;
}

LoadCase sample_load_2d(Rng& rng, const TractionRanges2d& ranges, const Mesh& mesh,
                        const std::vector<std::size_t>& region) {
    if (region.size() < 2) throw ConfigError("sample_load_2d: region needs >= 2 nodes");
    const std::size_t n_edges = region.size() - 1;
    const std::size_t start = static_cast<std::size_t>(rng.below(n_edges));
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(n_edges - start));
    const double fx = rng.uniform(ranges.fx_min, ranges.fx_max);
    const double fy = rng.uniform(ranges.fy_min, ranges.fy_max);

    LoadCase load;
    load.segment_nodes.assign(region.begin() + static_cast<std::ptrdiff_t>(start),
                              region.begin() + static_cast<std::ptrdiff_t>(start + len + 1));
    load.density = {fx, fy, 0.0};
    load.forces = traction_nodal_forces(mesh, load.segment_nodes, fx, fy);
    for (std::size_t d : mesh.fixed_dofs) load.forces[d] = 0.0;
    return load;
}

LoadCase sample_body_load_3d(Rng& rng, const BodyRanges3d& ranges, const Mesh& mesh,
                             double mass_density) {
    const double bx = rng.uniform(ranges.bx_min, ranges.bx_max);
    const double bz = rng.uniform(ranges.bz_min, ranges.bz_max);
    LoadCase load;
    load.density = {bx, 0.0, bz};
    load.forces = body_nodal_forces(mesh, load.density, mass_density);
    for (std::size_t d : mesh.fixed_dofs) load.forces[d] = 0.0;
    return load;
}

namespace {
double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
double range_ratio(double v, double lo, double hi) {
    const double m = std::max(std::fabs(lo), std::fabs(hi));
    return m > 0.0 ? std::fabs(v) / m : 0.0;
}
} // namespace

double relative_load_magnitude(const LoadCase& load, const TractionRanges2d& r) {
    return clamp01(std::max(range_ratio(load.density[0], r.fx_min, r.fx_max),
                            range_ratio(load.density[1], r.fy_min, r.fy_max)));
}

double relative_load_magnitude(const LoadCase& load, const BodyRanges3d& r) {
    return clamp01(std::max(range_ratio(load.density[0], r.bx_min, r.bx_max),
                            range_ratio(load.density[2], r.bz_min, r.bz_max)));
}

} // namespace surromesh
