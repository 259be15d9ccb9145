#pragma once

#include "robin/mesh.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace robin::fem {

using geom::Vec2;

/// Symmetric matrix triple for the Robin form: q^gamma(u,u) = u'(K - gamma B)u
/// against u'Mu, with Dirichlet-tagged degrees of freedom eliminated.
struct SpectralPencil {
  Eigen::SparseMatrix<double> K;  // stiffness
  Eigen::SparseMatrix<double> B;  // Robin boundary mass
  Eigen::SparseMatrix<double> M;  // mass
  int order = 1;                  // element order, 1 or 2
  int n_dofs = 0;
  std::vector<int> dof_of_node;            // -1 when eliminated
  std::vector<int> dof_of_edge;            // P2 midpoint dofs, by edge slot
  std::vector<std::pair<int, int>> edges;  // edge slot -> node pair (a<b)
  std::vector<Vec2> dof_points;            // dof -> coordinate (nodal basis)
};

SpectralPencil assemble(const mesh::TriMesh& m, int order);

/// (x'Kx - gamma x'Bx) / x'Mx
double rayleigh(const SpectralPencil& p, double gamma, const Eigen::VectorXd& x);

/// MatrixMarket coordinate output (symmetric, 1-based).
void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::string& path);

}  // namespace robin::fem
