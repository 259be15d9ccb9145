#include "robin/quasimode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "json.hpp"

namespace robin::quasimode {

double Cutoff::radial(double d) const {
  const double r = inner_radius;
  if (d <= r) return 1.0;
  if (d >= 2 * r) return 0.0;
  const double t = (d - r) / r;
  return 1.0 - (10 * t * t * t - 15 * t * t * t * t + 6 * t * t * t * t * t);
}

PencilOps::PencilOps(const fem::SpectralPencil& p) : p_(p) {
  mfac_.compute(p.M);
  if (mfac_.info() != Eigen::Success)
    throw std::runtime_error("mass matrix factorization failed");
}

double PencilOps::norm_M(const Eigen::VectorXd& x) const {
  return std::sqrt(std::max(0.0, x.dot(p_.M * x)));
}

double PencilOps::residual(const Eigen::VectorXd& x, double gamma, double lambda) const {
  const Eigen::VectorXd r = p_.K * x - gamma * (p_.B * x) - lambda * (p_.M * x);
  const Eigen::VectorXd z = mfac_.solve(r);
  const double num = std::sqrt(std::max(0.0, r.dot(z)));
  const double den = norm_M(x);
  if (!(den > 0)) throw std::invalid_argument("residual of the zero vector");
  return num / den;
}

namespace {

double arc_distance_to(const geom::Arc& arc, const geom::Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  const int n = 128;
  for (int j = 0; j <= n; ++j)
    best = std::min(best, (arc.point(arc.length() * j / n) - p).norm());
  return best;
}

}  // namespace

QuasiMode build_quasimode(const geom::CurvilinearPolygon& poly,
                          const fem::SpectralPencil& pencil, const sector::ModelSum& model,
                          int vertex_index, int n, double gamma, double beta_exp) {
  const auto convex = poly.convex_vertex_indices();
  if (std::find(convex.begin(), convex.end(), vertex_index) == convex.end())
    throw std::invalid_argument("quasi-mode vertex must be a convex vertex");
  const sector::SectorSpectrum& spec = model.spectrum_at(vertex_index);
  if (n < 1 || n > spec.count)
    throw std::invalid_argument("quasi-mode index beyond the model spectrum");
  if (!spec.eval) throw std::invalid_argument("sector spectrum carries no eigenfunctions");

  // cutoff radius: rho for straight polygons, gamma^(-beta) for curvilinear
  double r_cut;
  if (poly.is_straight()) {
    double min_rho = std::numeric_limits<double>::infinity();
    for (int vi : convex) min_rho = std::min(min_rho, poly.vertices()[vi].rho);
    if (!std::isfinite(min_rho))
      throw std::invalid_argument("straight polygon cutoff radius undefined");
    r_cut = min_rho / 2.0;
  } else {
    if (!(beta_exp > 0.5 && beta_exp < 1.0))
      throw std::invalid_argument("beta_exp must lie in (1/2, 1)");
    r_cut = std::pow(gamma, -beta_exp);
  }

  // disjoint supports across convex vertices
  const geom::Vec2 v = poly.vertices()[vertex_index].position;
  for (int wi : convex) {
    if (wi == vertex_index) continue;
    const double d = (poly.vertices()[wi].position - v).norm();
    if (d < 4 * r_cut - 1e-12)
      throw std::invalid_argument("gamma too small: quasi-mode supports overlap");
  }
  // the support must see only the two incident arcs
  const auto& vx = poly.vertices()[vertex_index];
  for (int k = 0; k < static_cast<int>(poly.arcs().size()); ++k) {
    if (k == vx.arc_in || k == vx.arc_out) continue;
    if (arc_distance_to(*poly.arcs()[k], v) < 2 * r_cut - 1e-12)
      throw std::invalid_argument("cutoff support leaves the corner wedge region");
  }
  for (int k : {vx.arc_in, vx.arc_out})
    if (poly.arcs()[k]->length() < 2 * r_cut - 1e-12)
      throw std::invalid_argument("cutoff support leaves the corner wedge region");
  if (gamma * 2 * r_cut > spec.eval->radius() * (1 + 1e-12))
    throw std::invalid_argument("cutoff support exits the sector solution region");

  const geom::RigidFrame frame = poly.tangent_frame(vertex_index);
  Cutoff chi{v, r_cut};

  QuasiMode qm;
  qm.vertex = vertex_index;
  qm.n = n;
  qm.gamma = gamma;
  qm.inner_radius = r_cut;
  qm.lambda_target = gamma * gamma * spec.eigenvalues[n - 1];
  qm.dof = Eigen::VectorXd::Zero(pencil.n_dofs);
  for (int d = 0; d < pencil.n_dofs; ++d) {
    const geom::Vec2& x = pencil.dof_points[d];
    const double dist = (x - v).norm();
    if (dist >= 2 * r_cut) continue;
    const geom::Vec2 u = gamma * frame.apply(x);
    qm.dof[d] = gamma * spec.eval->value(n, u) * chi.radial(dist);
  }

  PencilOps ops(pencil);
  qm.norm_M = ops.norm_M(qm.dof);
  if (!(qm.norm_M > 0))
    throw std::runtime_error("quasi-mode vanished after interpolation");
  if (qm.norm_M > 1.0) {  // interpolation wiggle; the transplant norm is <= 1
    qm.dof /= qm.norm_M;
    qm.norm_M = 1.0;
  }
  return qm;
}

double residual(const QuasiMode& qm, const PencilOps& ops, double gamma) {
  return ops.residual(qm.dof, gamma, qm.lambda_target);
}

Certificate certify(const std::vector<QuasiMode>& qms, const fem::SpectralPencil& pencil,
                    double gamma) {
  if (qms.empty()) throw std::invalid_argument("certify: empty quasi-mode family");
  const int n = static_cast<int>(qms.size());
  double lambda = 0;
  for (const auto& q : qms) lambda += q.lambda_target;
  lambda /= n;
  for (const auto& q : qms)
    if (std::abs(q.lambda_target - lambda) > 1e-3 * std::abs(lambda) + 1e-12)
      throw std::invalid_argument("certify: quasi-modes target different clusters");

  PencilOps ops(pencil);
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double g = qms[i].dof.dot(pencil.M * qms[j].dof);
      G(i, j) = g;
      G(j, i) = g;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double beta_min = es.eigenvalues().minCoeff();
  const double beta_max = es.eigenvalues().maxCoeff();
  if (!(beta_min > 1e-12 * std::max(1.0, beta_max)))
    throw std::runtime_error("certify: quasi-mode family is numerically dependent");

  double eta = 0;
  for (const auto& q : qms) eta = std::max(eta, ops.residual(q.dof, gamma, lambda));

  Certificate c;
  c.lambda = lambda;
  c.n = n;
  c.eta = eta;
  c.beta_min = beta_min;
  c.beta_max = beta_max;
  c.orthonormal_rule = (G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10;
  c.halfwidth = c.orthonormal_rule
                    ? std::sqrt(static_cast<double>(n)) * eta
                    : std::pow(static_cast<double>(n), 1.5) * eta * std::sqrt(beta_max / beta_min);

  const auto hi = eig::count_below(pencil, gamma, lambda + c.halfwidth);
  const auto lo = eig::count_below(pencil, gamma, lambda - c.halfwidth);
  c.verified_count = hi.count - lo.count;

  std::ostringstream os;
  os.precision(12);
  os << ">= " << n << " eigenvalues in (" << lambda - c.halfwidth << ", "
     << lambda + c.halfwidth << ")";
  c.claim = os.str();
  return c;
}

std::string certificate_json(const Certificate& c) {
  nlohmann::json j;
  j["lambda"] = c.lambda;
  j["n"] = c.n;
  j["eta"] = c.eta;
  j["beta_min"] = c.beta_min;
  j["beta_max"] = c.beta_max;
  j["halfwidth"] = c.halfwidth;
  j["verified_count"] = c.verified_count;
  j["claim"] = c.claim;
  return j.dump(2);
}

double subspace_distance(const Eigen::MatrixXd& F, const Eigen::MatrixXd& E,
                         const Eigen::SparseMatrix<double>& M) {
  if (F.cols() == 0 || E.cols() == 0)
    throw std::invalid_argument("subspace_distance: empty family");
  const auto orthonormalize = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd G = X.transpose() * (M * X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double tol = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
    if (!(es.eigenvalues().minCoeff() > tol))
      throw std::invalid_argument("subspace_distance: rank-deficient family");
    const Eigen::MatrixXd inv_sqrt =
        es.eigenvectors() *
        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    return Eigen::MatrixXd(X * inv_sqrt);
  };
  const Eigen::MatrixXd QF = orthonormalize(F);
  const Eigen::MatrixXd QE = orthonormalize(E);
  if (QF.cols() > QE.cols()) return 1.0;  // some direction of F is M-orthogonal to E
  const Eigen::MatrixXd C = QF.transpose() * (M * QE);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
  const double smin = svd.singularValues().minCoeff();
  return std::sqrt(std::max(0.0, 1.0 - smin * smin));
}

}  // namespace robin::quasimode
