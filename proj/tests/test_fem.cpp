#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "surromesh/dataset.hpp"
#include "surromesh/fem.hpp"
#include "surromesh/rng.hpp"

using namespace surromesh;

namespace {

// independent plane-strain linear stiffness via the B-matrix formulation
Eigen::MatrixXd quad4_linear_stiffness(const Mesh& mesh, std::size_t elem, const Material& mat) {
    static const double xi_a[4] = {-1, 1, 1, -1};
    static const double eta_a[4] = {-1, -1, 1, 1};
    const auto& e = mesh.elements[elem];
    Eigen::Matrix3d D;
    D << mat.lambda + 2 * mat.mu, mat.lambda, 0, mat.lambda, mat.lambda + 2 * mat.mu, 0, 0, 0,
        mat.mu;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(8, 8);
    const double g = 1.0 / std::sqrt(3.0);
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            const double xi = qx ? g : -g, eta = qy ? g : -g;
            double dNdxi[4][2];
            for (int a = 0; a < 4; ++a) {
                dNdxi[a][0] = 0.25 * xi_a[a] * (1 + eta_a[a] * eta);
                dNdxi[a][1] = 0.25 * eta_a[a] * (1 + xi_a[a] * xi);
            }
            Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) J(i, j) += mesh.coord(e[a], i) * dNdxi[a][j];
            const Eigen::Matrix2d Jinv = J.inverse();
            Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 8);
            for (int a = 0; a < 4; ++a) {
                const double dx = dNdxi[a][0] * Jinv(0, 0) + dNdxi[a][1] * Jinv(1, 0);
                const double dy = dNdxi[a][0] * Jinv(0, 1) + dNdxi[a][1] * Jinv(1, 1);
                B(0, 2 * a) = dx;
                B(1, 2 * a + 1) = dy;
                B(2, 2 * a) = dy;
                B(2, 2 * a + 1) = dx;
            }
            K += B.transpose() * D * B * J.determinant();
        }
    return K;
}

Mesh single_quad_fixed_left() {
    Mesh mesh = build_grid_mesh(2, 2, 1.0, 1.0, false);
    mesh.fixed_dofs = {0, 1, 4, 5}; // nodes 0 and 2 (x = 0 edge)
    return mesh;
}

} // namespace

TEST_CASE("lame conversion") {
    {
        const auto [mu, lambda] = lame_from_E_nu(100.0, 0.3);
        CHECK(mu == doctest::Approx(38.46153846153846).epsilon(1e-12));
        CHECK(lambda == doctest::Approx(57.69230769230769).epsilon(1e-12));
    }
    {
        const auto [mu, lambda] = lame_from_E_nu(3e6, 0.4);
        CHECK(mu == doctest::Approx(1.0714285714285714e6).epsilon(1e-12));
        CHECK(lambda == doctest::Approx(4.285714285714286e6).epsilon(1e-12));
    }
    {
        const auto [mu, lambda] = lame_from_E_nu(10.0, 0.0);
        CHECK(lambda == 0.0);
        CHECK(mu == 5.0);
    }
    CHECK_THROWS_AS(lame_from_E_nu(100.0, 0.5), MaterialError);
    CHECK_THROWS_AS(lame_from_E_nu(-1.0, 0.3), MaterialError);
}

TEST_CASE("element kernels") {
    const Material mat = material_from_E_nu(100.0, 0.3);

    SUBCASE("zero displacement: zero force, linear-elastic tangent") {
        const Mesh mesh = build_grid_mesh(2, 2, 1.0, 1.0, false);
        const double u0[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        const ElementKernel kern = element_force_tangent(mesh, 0, u0, mat);
        for (int i = 0; i < 8; ++i) CHECK(kern.f_int[i] == 0.0);
        const Eigen::MatrixXd K_lin = quad4_linear_stiffness(mesh, 0, mat);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c)
                CHECK(kern.tangent[r * 8 + c] ==
                      doctest::Approx(K_lin(r, c)).epsilon(1e-8).scale(mat.E));
    }

    SUBCASE("uniaxial stretch matches the closed-form first Piola stress") {
        const Mesh mesh = build_grid_mesh(2, 2, 1.0, 1.0, false);
        const double stretch = 1.25;
        double u[8];
        for (int a = 0; a < 4; ++a) {
            const std::size_t node = mesh.elements[0][a];
            u[a * 2 + 0] = (stretch - 1.0) * mesh.coord(node, 0);
            u[a * 2 + 1] = 0.0;
        }
        const ElementKernel kern = element_force_tangent(mesh, 0, u, mat);
        const double J = stretch;
        const double p11 = mat.mu * (stretch - 1.0 / stretch) + mat.lambda * std::log(J) / stretch;
        const double p22 = mat.lambda * std::log(J);
        const double gx[4] = {-0.5, 0.5, 0.5, -0.5};
        const double gy[4] = {-0.5, -0.5, 0.5, 0.5};
        for (int a = 0; a < 4; ++a) {
            CHECK(kern.f_int[a * 2 + 0] == doctest::Approx(p11 * gx[a]).epsilon(1e-8));
            CHECK(kern.f_int[a * 2 + 1] == doctest::Approx(p22 * gy[a]).epsilon(1e-8));
        }
    }

    SUBCASE("tangent equals central differences of the internal force") {
        Rng rng(71);
        for (int dim3 = 0; dim3 < 2; ++dim3) {
            const Mesh mesh = dim3 ? build_beam_tet_mesh(2, 2, 2, 1.0, 1.0, 1.0)
                                   : build_grid_mesh(2, 2, 1.0, 1.0, false);
            const int nd = 4 * mesh.dim;
            std::vector<double> u(nd);
            for (auto& v : u) v = 0.05 * rng.uniform(-1.0, 1.0);
            const ElementKernel kern = element_force_tangent(mesh, 0, u.data(), mat);
            const double h = 1e-6;
            for (int d = 0; d < nd; ++d) {
                std::vector<double> up = u, um = u;
                up[d] += h;
                um[d] -= h;
                const ElementKernel kp = element_force_tangent(mesh, 0, up.data(), mat);
                const ElementKernel km = element_force_tangent(mesh, 0, um.data(), mat);
                for (int r = 0; r < nd; ++r) {
                    const double numeric = (kp.f_int[r] - km.f_int[r]) / (2 * h);
                    const double analytic = kern.tangent[r * nd + d];
                    const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-12});
                    CHECK(std::fabs(numeric - analytic) / denom < 1e-6);
                }
            }
        }
    }

    SUBCASE("element tangent is symmetric") {
        Rng rng(73);
        const Mesh mesh = build_grid_mesh(2, 2, 1.0, 1.0, false);
        double u[8];
        for (auto& v : u) v = 0.1 * rng.uniform(-1.0, 1.0);
        const ElementKernel kern = element_force_tangent(mesh, 0, u, mat);
        double scale = 0.0;
        for (int i = 0; i < 64; ++i) scale = std::max(scale, std::fabs(kern.tangent[i]));
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c)
                CHECK(std::fabs(kern.tangent[r * 8 + c] - kern.tangent[c * 8 + r]) <=
                      1e-10 * scale);
    }

    SUBCASE("internal force is the gradient of the strain energy") {
        Rng rng(79);
        const Mesh mesh = build_grid_mesh(3, 3, 1.0, 1.0, false);
        std::vector<double> u(mesh.n_dofs());
        for (auto& v : u) v = 0.05 * rng.uniform(-1.0, 1.0);
        const System sys = assemble(mesh, mat, u);
        const double h = 1e-6;
        for (std::size_t d = 0; d < mesh.n_dofs(); ++d) {
            std::vector<double> up = u, um = u;
            up[d] += h;
            um[d] -= h;
            const double numeric =
                (total_strain_energy(mesh, mat, up) - total_strain_energy(mesh, mat, um)) / (2 * h);
            const double analytic = sys.f_int[static_cast<Eigen::Index>(d)];
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-12});
            CHECK(std::fabs(numeric - analytic) / denom < 1e-6);
        }
    }

    SUBCASE("inverted element raises") {
        const Mesh mesh = build_grid_mesh(2, 2, 1.0, 1.0, false);
        // collapse the element through itself
        const double u[8] = {0, 0, -2.0, 0, -2.0, 0, 0, 0};
        CHECK_THROWS_AS(element_force_tangent(mesh, 0, u, mat), InvertedElementError);
    }
}

TEST_CASE("assembly") {
    const Material mat = material_from_E_nu(100.0, 0.3);
    SUBCASE("zero state gives zero residual") {
        const Mesh mesh = build_grid_mesh(4, 5, 1.0, 1.0, true);
        const System sys = assemble(mesh, mat, std::vector<double>(mesh.n_dofs(), 0.0));
        for (Eigen::Index i = 0; i < sys.f_int.size(); ++i) CHECK(sys.f_int[i] == 0.0);
    }
    SUBCASE("one element mesh equals the element quantities") {
        const Mesh mesh = single_quad_fixed_left();
        Rng rng(83);
        std::vector<double> u(8, 0.0);
        // free nodes are 1 and 3 (dofs 2,3,6,7)
        for (std::size_t d : {2, 3, 6, 7}) u[d] = 0.05 * rng.uniform(-1.0, 1.0);
        const System sys = assemble(mesh, mat, u);
        double u_elem[8];
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 2; ++i) u_elem[a * 2 + i] = u[mesh.elements[0][a] * 2 + i];
        const ElementKernel kern = element_force_tangent(mesh, 0, u_elem, mat);
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 2; ++i)
                CHECK(sys.f_int[static_cast<Eigen::Index>(mesh.elements[0][a] * 2 + i)] ==
                      doctest::Approx(kern.f_int[a * 2 + i]).epsilon(1e-14));
    }
    SUBCASE("two-element strip matches a dense scatter oracle") {
        const Mesh mesh = build_grid_mesh(3, 2, 2.0, 1.0, false);
        Rng rng(89);
        std::vector<double> u(mesh.n_dofs());
        for (auto& v : u) v = 0.05 * rng.uniform(-1.0, 1.0);
        const System sys = assemble(mesh, mat, u);
        // brute-force dense scatter over all dofs (no fixed dofs here)
        Eigen::MatrixXd K_ref = Eigen::MatrixXd::Zero(12, 12);
        for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
            double u_elem[8];
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i) u_elem[a * 2 + i] = u[mesh.elements[el][a] * 2 + i];
            const ElementKernel kern = element_force_tangent(mesh, el, u_elem, mat);
            for (int r = 0; r < 8; ++r)
                for (int c = 0; c < 8; ++c)
                    K_ref(static_cast<Eigen::Index>(mesh.elements[el][r / 2] * 2 + r % 2),
                          static_cast<Eigen::Index>(mesh.elements[el][c / 2] * 2 + c % 2)) +=
                        kern.tangent[r * 8 + c];
        }
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c)
                CHECK(sys.k_free(r, c) == doctest::Approx(K_ref(r, c)).epsilon(1e-13));
    }
}

TEST_CASE("newton solver") {
    const Material mat = material_from_E_nu(100.0, 0.3);
    SUBCASE("zero load converges immediately to zero") {
        const Mesh mesh = build_grid_mesh(4, 5, 1.0, 1.0, true);
        LoadCase load;
        load.forces.assign(mesh.n_dofs(), 0.0);
        const NewtonReport rep = newton_solve(mesh, mat, load, {});
        CHECK(rep.newton_iterations == 0);
        for (double v : rep.u) CHECK(v == 0.0);
    }
    SUBCASE("small traction matches the linear solution to second order") {
        const Mesh mesh = single_quad_fixed_left();
        auto solve_both = [&](double eps) {
            LoadCase load;
            load.forces.assign(8, 0.0);
            load.forces[2] = eps; // node 1, x
            load.forces[6] = eps; // node 3, x
            const NewtonReport rep = newton_solve(mesh, mat, load, {1, 1e-13, 25});
            // linear oracle: tangent at zero
            const System sys = assemble(mesh, mat, std::vector<double>(8, 0.0));
            Eigen::VectorXd f(4);
            f << eps, 0.0, eps, 0.0;
            const Eigen::VectorXd ul = sys.k_free.partialPivLu().solve(f);
            double diff = 0.0, norm = 0.0;
            const double ufree[4] = {rep.u[2], rep.u[3], rep.u[6], rep.u[7]};
            for (int i = 0; i < 4; ++i) {
                diff += (ufree[i] - ul[i]) * (ufree[i] - ul[i]);
                norm += ul[i] * ul[i];
            }
            return std::sqrt(diff / norm);
        };
        const double r1 = solve_both(0.5);
        const double r2 = solve_both(0.25);
        CHECK(r1 < 5e-2);
        // halving the load shrinks the relative gap about linearly (O(eps^2) abs)
        CHECK(r2 < 0.6 * r1);
    }
    SUBCASE("converged solve shows superlinear terminal residual reduction") {
        const Mesh mesh = build_grid_mesh(8, 32, 1.0, 4.0, true);
        LoadCase load;
        load.forces = traction_nodal_forces(mesh, grid_traction_region(8, 32), 18.0, -6.0);
        for (std::size_t d : mesh.fixed_dofs) load.forces[d] = 0.0;
        const NewtonReport rep = newton_solve(mesh, mat, load, {1, 1e-11, 30});
        REQUIRE(rep.final_step_residuals.size() >= 4);
        const auto& r = rep.final_step_residuals;
        const std::size_t k = r.size() - 1;
        const double q_last = r[k] / r[k - 1];
        const double q_prev = r[k - 1] / r[k - 2];
        CHECK(q_last < q_prev);
        CHECK(q_last < 0.1);
    }
    SUBCASE("unreachable load fails with a solver error after halvings") {
        const Mesh mesh = single_quad_fixed_left();
        LoadCase load;
        load.forces.assign(8, 0.0);
        load.forces[3] = -1e5; // crushing load
        load.forces[7] = -1e5;
        CHECK_THROWS_AS(newton_solve(mesh, mat, load, {2, 1e-9, 8}), SolverError);
    }
}

TEST_CASE("load samplers") {
    const Mesh mesh = build_grid_mesh(8, 32, 1.0, 4.0, true);
    const auto region = grid_traction_region(8, 32);

    SUBCASE("zero-width ranges give a zero load") {
        Rng rng(97);
        const TractionRanges2d zero{0.0, 0.0, 0.0, 0.0};
        const LoadCase load = sample_load_2d(rng, zero, mesh, region);
        for (double v : load.forces) CHECK(v == 0.0);
    }
    SUBCASE("benchmark line density over four nodes") {
        // full-edge analogue of the published example load
        const std::vector<std::size_t> segment(region.begin(), region.begin() + 4);
        const auto f = traction_nodal_forces(mesh, segment, -21.6645, -2.99384);
        double fx = 0.0, fy = 0.0, len = 0.0;
        for (std::size_t k = 0; k + 1 < segment.size(); ++k)
            len += std::fabs(mesh.coord(segment[k + 1], 0) - mesh.coord(segment[k], 0));
        for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
            fx += f[n * 2];
            fy += f[n * 2 + 1];
        }
        CHECK(fx == doctest::Approx(-21.6645 * len).epsilon(1e-12));
        CHECK(fy == doctest::Approx(-2.99384 * len).epsilon(1e-12));
    }
    SUBCASE("lumping consistency for random samples") {
        Rng rng(101);
        for (int trial = 0; trial < 20; ++trial) {
            const LoadCase load = sample_load_2d(rng, {}, mesh, region);
            double len = 0.0;
            for (std::size_t k = 0; k + 1 < load.segment_nodes.size(); ++k) {
                const double dx = mesh.coord(load.segment_nodes[k + 1], 0) -
                                  mesh.coord(load.segment_nodes[k], 0);
                const double dy = mesh.coord(load.segment_nodes[k + 1], 1) -
                                  mesh.coord(load.segment_nodes[k], 1);
                len += std::sqrt(dx * dx + dy * dy);
            }
            double fx = 0.0, fy = 0.0;
            for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
                fx += load.forces[n * 2];
                fy += load.forces[n * 2 + 1];
            }
            CHECK(fx == doctest::Approx(load.density[0] * len).epsilon(1e-12));
            CHECK(fy == doctest::Approx(load.density[1] * len).epsilon(1e-12));
            // region excludes fixed corners, so nothing lands on fixed dofs
            for (std::size_t d : mesh.fixed_dofs) CHECK(load.forces[d] == 0.0);
        }
    }
    SUBCASE("3D body loads") {
        const Mesh beam = build_beam_tet_mesh(3, 2, 2, 1.0, 1.0, 1.0);
        Rng rng(103);
        const BodyRanges3d zero{0.0, 0.0, 0.0, 0.0};
        const LoadCase none = sample_body_load_3d(rng, zero, beam, 1.0);
        for (double v : none.forces) CHECK(v == 0.0);

        // global balance before masking: total x-force equals the mesh mass
        const auto f = body_nodal_forces(beam, {1.0, 0.0, 0.0}, 1.0);
        double fx = 0.0;
        for (std::size_t n = 0; n < beam.n_nodes(); ++n) fx += f[n * 3];
        CHECK(fx == doctest::Approx(1.0).epsilon(1e-12)); // unit volume, unit density

        // published 3D loading direction reproduces
        Rng rng2(105);
        BodyRanges3d fig{0.34, 0.34, 0.35, 0.35};
        const LoadCase fig_load = sample_body_load_3d(rng2, fig, beam, 1.0);
        CHECK(fig_load.density[0] == 0.34);
        CHECK(fig_load.density[1] == 0.0);
        CHECK(fig_load.density[2] == 0.35);
    }
}

TEST_CASE("dataset generation") {
    const Mesh mesh = build_grid_mesh(5, 8, 1.0, 2.0, true);
    const Material mat = material_from_E_nu(100.0, 0.3);
    DatasetConfig config;
    config.n_samples = 20;
    config.split = 0.95;
    config.seed = 7;
    config.region = grid_traction_region(5, 8);
    config.traction = {-6.0, 6.0, -2.0, 2.0};

    SUBCASE("split arithmetic and equilibrium") {
        const Dataset ds = generate_dataset(mesh, mat, config);
        CHECK(ds.n_train == 19);
        CHECK(ds.n_test == 1);
        CHECK(verify_dataset_equilibrium(mesh, mat, ds) <= 1e-9);
    }
    SUBCASE("fixed seed reproduces bytes; threads do not change them") {
        const Dataset a = generate_dataset(mesh, mat, config);
        const Dataset b = generate_dataset(mesh, mat, config);
        CHECK(a.forces == b.forces);
        CHECK(a.displacements == b.displacements);
        DatasetConfig threaded = config;
        threaded.threads = 2;
        const Dataset c = generate_dataset(mesh, mat, threaded);
        CHECK(a.forces == c.forces);
        CHECK(a.displacements == c.displacements);
    }
    SUBCASE("save/load round trip") {
        const Dataset ds = generate_dataset(mesh, mat, config);
        const std::string dir = "/tmp/surromesh_test_dataset";
        save_dataset(ds, dir);
        const Dataset back = load_dataset(dir);
        CHECK(back.n_train == ds.n_train);
        CHECK(back.n_test == ds.n_test);
        CHECK(back.forces == ds.forces);
        CHECK(back.displacements == ds.displacements);
        const Mesh mesh_back = dataset_mesh(back);
        CHECK(mesh_back.n_dofs() == mesh.n_dofs());
        const Material mat_back = dataset_material(back);
        CHECK(mat_back.mu == mat.mu);
    }
}
