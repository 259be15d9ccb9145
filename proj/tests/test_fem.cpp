#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "robin/eig.hpp"
#include "robin/fem.hpp"
#include "robin/model1d.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace robin;
using geom::Vec2;

namespace {

mesh::TriMesh square_mesh(double h, int levels = 0) {
  mesh::GradingPolicy pol;
  pol.target_h = h;
  pol.levels = levels;
  return mesh_polygon(geom::make_square(), pol);
}

double sym_error(const Eigen::SparseMatrix<double>& A) {
  const Eigen::SparseMatrix<double> D = Eigen::SparseMatrix<double>(A.transpose()) - A;
  double num = 0, den = 0;
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it)
      num = std::max(num, std::abs(it.value()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      den = std::max(den, std::abs(it.value()));
  return num / std::max(den, 1e-300);
}

}  // namespace

TEST_CASE("single reference triangle: P1 stiffness rows sum to zero") {
  mesh::TriMesh m;
  m.nodes = {{0, 0}, {1, 0}, {0, 1}};
  m.tris = {{0, 1, 2}};
  m.bedges = {{0, 1, mesh::BoundaryTag::Robin, -1, 0, 0},
              {1, 2, mesh::BoundaryTag::Robin, -1, 0, 0},
              {2, 0, mesh::BoundaryTag::Robin, -1, 0, 0}};
  const auto p = fem::assemble(m, 1);
  const Eigen::MatrixXd K(p.K);
  REQUIRE(K.rows() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(K.row(i).sum()) < 1e-14);
  // standard unit right triangle stiffness
  CHECK(K(0, 0) == doctest::Approx(1.0));
  CHECK(K(1, 1) == doctest::Approx(0.5));
  CHECK(K(2, 2) == doctest::Approx(0.5));
}

TEST_CASE("partition of unity: mass gives area, boundary mass gives length") {
  const auto m = square_mesh(0.14);
  for (int order : {1, 2}) {
    const auto p = fem::assemble(m, order);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p.n_dofs);
    CHECK(ones.dot(p.M * ones) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ones.dot(p.B * ones) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(ones.dot(p.K * ones) < 1e-10);  // constants in the kernel
    CHECK(sym_error(p.K) < 1e-13);
    CHECK(sym_error(p.B) < 1e-13);
    CHECK(sym_error(p.M) < 1e-13);
  }
}

TEST_CASE("mass positive definite, boundary mass positive semidefinite") {
  const auto m = square_mesh(0.25);
  const auto p = fem::assemble(m, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(Eigen::MatrixXd(p.M));
  CHECK(em.eigenvalues().minCoeff() > 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(Eigen::MatrixXd(p.B));
  CHECK(eb.eigenvalues().minCoeff() > -1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(Eigen::MatrixXd(p.K));
  CHECK(ek.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("Dirichlet elimination removes truncation-boundary dofs") {
  geom::SectorGeometry sec{std::numbers::pi / 4, 6.0};
  mesh::GradingPolicy pol;
  pol.target_h = 0.5;
  const auto m = mesh_truncated_sector(sec, pol);
  const auto p1 = fem::assemble(m, 1);
  CHECK(p1.n_dofs < m.n_nodes());
  long long dirichlet_nodes = 0;
  for (char f : m.node_boundary_flags())
    if (f == 2) ++dirichlet_nodes;
  CHECK(p1.n_dofs == m.n_nodes() - dirichlet_nodes);
  // with a Dirichlet part, constants are not in the kernel
  const auto p2 = fem::assemble(m, 2);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p2.n_dofs);
  CHECK(ones.dot(p2.K * ones) > 1e-3);
}

TEST_CASE("rayleigh quotient basics") {
  const auto m = square_mesh(0.2);
  const auto p = fem::assemble(m, 1);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p.n_dofs);
  CHECK(fem::rayleigh(p, 1.0, ones) == doctest::Approx(-4.0).epsilon(1e-12));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd x(p.n_dofs);
    for (int i = 0; i < p.n_dofs; ++i) x[i] = gauss(rng);
    CHECK(fem::rayleigh(p, 0.0, x) >= -1e-13);  // K is PSD
  }
  CHECK_THROWS(fem::rayleigh(p, 1.0, Eigen::VectorXd::Zero(p.n_dofs)));
}

TEST_CASE("rayleigh of the first eigenvector equals the eigenvalue") {
  const auto m = square_mesh(0.22);
  const auto p = fem::assemble(m, 2);
  const auto res = eig::solve_lowest(p, 10.0, 1, 1e-10);
  CHECK(std::abs(fem::rayleigh(p, 10.0, res.eigenvectors.col(0)) - res.eigenvalues[0]) <
        1e-10 * std::abs(res.eigenvalues[0]));
}

TEST_CASE("assembly is node-order independent") {
  const auto m = square_mesh(0.28);
  const auto p = fem::assemble(m, 1);
  // permute nodes
  mesh::TriMesh mp = m;
  std::vector<int> perm(m.n_nodes());
  for (int i = 0; i < m.n_nodes(); ++i) perm[i] = i;
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < m.n_nodes(); ++i) mp.nodes[perm[i]] = m.nodes[i];
  for (auto& t : mp.tris)
    for (int j = 0; j < 3; ++j) t[j] = perm[t[j]];
  for (auto& be : mp.bedges) {
    be.a = perm[be.a];
    be.b = perm[be.b];
  }
  const auto pp = fem::assemble(mp, 1);
  const auto r1 = eig::solve_lowest(p, 5.0, 6, 1e-12);
  const auto r2 = eig::solve_lowest(pp, 5.0, 6, 1e-12);
  for (int i = 0; i < 6; ++i)
    CHECK(std::abs(r1.eigenvalues[i] - r2.eigenvalues[i]) < 1e-10);
}

TEST_CASE("conforming upper bounds: eigenvalues decrease under refinement") {
  auto m = square_mesh(0.3);
  const double gamma = 5.0;
  std::vector<Eigen::VectorXd> sweeps;
  for (int level = 0; level < 3; ++level) {
    const auto p = fem::assemble(m, 2);
    sweeps.push_back(eig::solve_lowest(p, gamma, 10, 1e-11).eigenvalues);
    if (level < 2) m = refine_uniform(m);
  }
  for (int level = 1; level < 3; ++level)
    for (int i = 0; i < 10; ++i)
      CHECK(sweeps[level - 1][i] >= sweeps[level][i] - 1e-9);
}

TEST_CASE("P2 eigenvalue error contracts ~16x per refinement on the square") {
  const double gamma = 3.0;  // boundary layer 1/gamma resolved from the base mesh on
  const double exact = model1d::square_oracle(gamma, 1.0, 1)[0];
  auto m = square_mesh(0.2);
  std::vector<double> errs;
  for (int level = 0; level < 3; ++level) {
    const auto p = fem::assemble(m, 2);
    errs.push_back(eig::solve_lowest(p, gamma, 1, 1e-12).eigenvalues[0] - exact);
    CHECK(errs.back() > 0);  // conforming: from above
    if (level < 2) m = refine_uniform(m);
  }
  for (int level = 1; level < 3; ++level) {
    const double rate = errs[level - 1] / errs[level];
    CHECK(rate > 16.0 * 0.7);
    CHECK(rate < 16.0 * 1.3);
  }
}

TEST_CASE("matrix market export") {
  const auto m = square_mesh(0.4);
  const auto p = fem::assemble(m, 1);
  const std::string path = std::filesystem::temp_directory_path() / "robin_k.mtx";
  fem::write_matrix_market(p.K, path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "%%MatrixMarket matrix coordinate real symmetric");
  int rows, cols;
  long long nnz;
  f >> rows >> cols >> nnz;
  CHECK(rows == p.n_dofs);
  CHECK(cols == p.n_dofs);
  long long lower = 0;
  for (int k = 0; k < p.K.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.K, k); it; ++it)
      if (it.row() >= it.col()) ++lower;
  CHECK(nnz == lower);
}

TEST_CASE("assemble rejects empty and inverted meshes") {
  mesh::TriMesh empty;
  CHECK_THROWS(fem::assemble(empty, 1));
  mesh::TriMesh bad;
  bad.nodes = {{0, 0}, {1, 0}, {0, 1}};
  bad.tris = {{0, 2, 1}};  // clockwise
  CHECK_THROWS(fem::assemble(bad, 1));
  CHECK_THROWS(fem::assemble(square_mesh(0.5), 3));
}
