#pragma once

#include "robin/eig.hpp"
#include "robin/sector.hpp"

#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

namespace robin::quasimode {

using geom::Vec2;

/// Radial C^2 cutoff: 1 on [0, r], quintic smoothstep down to 0 on [r, 2r].
struct Cutoff {
  Vec2 center = Vec2::Zero();
  double inner_radius = 0;

  double radial(double d) const;
  double operator()(const Vec2& x) const { return radial((x - center).norm()); }
};

struct QuasiMode {
  int vertex = -1;
  int n = 1;
  double gamma = 0;
  Eigen::VectorXd dof;       // interpolant on the pencil's dof layout
  double lambda_target = 0;  // gamma^2 E_n(T_v)
  double norm_M = 0;
  double inner_radius = 0;
};

struct Certificate {
  double lambda = 0;
  int n = 0;
  double eta = 0;
  double beta_min = 0, beta_max = 0;
  double halfwidth = 0;
  long long verified_count = -1;  // inertia count inside the interval
  bool orthonormal_rule = false;  // sqrt(n) eta rule applied
  std::string claim;
};

/// Mass-weighted helpers around one pencil (caches the M factorization).
class PencilOps {
public:
  explicit PencilOps(const fem::SpectralPencil& p);
  double norm_M(const Eigen::VectorXd& x) const;
  /// ||M^{-1}((K - gamma B - lambda M) x)||_M / ||x||_M
  double residual(const Eigen::VectorXd& x, double gamma, double lambda) const;
  const fem::SpectralPencil& pencil() const { return p_; }

private:
  const fem::SpectralPencil& p_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> mfac_;
};

/// Interpolates the cut-off transplant of the model eigenfunction
/// psi_n at the convex vertex onto the pencil's degrees of freedom. For
/// straight polygons the cutoff inner radius is rho = min_v rho_v / 2; for
/// curvilinear ones it is gamma^(-beta_exp).
QuasiMode build_quasimode(const geom::CurvilinearPolygon& poly,
                          const fem::SpectralPencil& pencil, const sector::ModelSum& model,
                          int vertex_index, int n, double gamma, double beta_exp = 2.0 / 3.0);

double residual(const QuasiMode& qm, const PencilOps& ops, double gamma);

/// Appendix-style certificate for a family of quasi-modes sharing one target:
/// an interval around lambda of halfwidth n^{3/2} eta sqrt(beta_max/beta_min)
/// (sqrt(n) eta for an orthonormal family) that carries at least n eigenvalues,
/// verified against the inertia counts at both endpoints.
Certificate certify(const std::vector<QuasiMode>& qms, const fem::SpectralPencil& pencil,
                    double gamma);

std::string certificate_json(const Certificate& c);

/// Largest principal-angle sine from span(F) into span(E) in the M geometry.
double subspace_distance(const Eigen::MatrixXd& F, const Eigen::MatrixXd& E,
                         const Eigen::SparseMatrix<double>& M);

}  // namespace robin::quasimode
