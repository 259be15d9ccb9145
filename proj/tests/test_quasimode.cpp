#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "robin/model1d.hpp"
#include "robin/quasimode.hpp"

#include <cmath>
#include <memory>

using namespace robin;
using quasimode::QuasiMode;
using quasimode::build_quasimode;
using quasimode::certify;
using quasimode::residual;

namespace {

struct SquareRig {
  geom::CurvilinearPolygon poly = geom::make_square();
  sector::ModelSum model;
  SquareRig() {
    sector::SectorPolicy sp;
    sp.refinements = 3;  // quasi-mode residuals inherit the sector accuracy
    model = sector::build_model_sum(poly, 1e-3, sp);
  }
  mesh::TriMesh mesh_for(double gamma) const {
    mesh::GradingPolicy mp;
    mp.target_h = std::min(0.05, 0.3 / gamma);
    mp.levels = static_cast<int>(std::ceil(std::log2(gamma * mp.target_h * 10)));
    return mesh_polygon(poly, mp);
  }
};

const SquareRig& rig() {
  static SquareRig r;
  return r;
}

}  // namespace

TEST_CASE("cutoff profile is a C2 quintic plateau") {
  quasimode::Cutoff chi{geom::Vec2(0, 0), 0.25};
  CHECK(chi.radial(0.0) == 1.0);
  CHECK(chi.radial(0.25) == 1.0);
  CHECK(chi.radial(0.5) == 0.0);
  CHECK(chi.radial(1.0) == 0.0);
  CHECK(chi.radial(0.375) == doctest::Approx(0.5));
  for (double d = 0.05; d < 0.6; d += 0.01) {
    CHECK(chi.radial(d) >= 0.0);
    CHECK(chi.radial(d) <= 1.0);
    CHECK(chi.radial(d + 0.01) <= chi.radial(d) + 1e-12);  // nonincreasing
  }
  // continuity of chi and chi' across the plateau edges
  const double h = 1e-6;
  for (double edge : {0.25, 0.5}) {
    CHECK(std::abs(chi.radial(edge + h) - chi.radial(edge - h)) < 1e-5);
    const double dl = (chi.radial(edge) - chi.radial(edge - h)) / h;
    const double dr = (chi.radial(edge + h) - chi.radial(edge)) / h;
    CHECK(std::abs(dl - dr) < 1e-4);
  }
}

TEST_CASE("square quasi-mode: norm within the frozen oracle window") {
  // transplanted ground state with rho = 0.25: exact quadrature of the
  // closed-form sector state gives ||phi~||^2 = 0.996939 at gamma = 10
  const auto& r = rig();
  const auto m = r.mesh_for(10.0);
  const auto p = fem::assemble(m, 2);
  for (int vi : r.poly.convex_vertex_indices()) {
    const auto qm = build_quasimode(r.poly, p, r.model, vi, 1, 10.0);
    CHECK(qm.norm_M * qm.norm_M >= 0.9950);
    CHECK(qm.norm_M * qm.norm_M <= 1.0);
    CHECK(qm.norm_M * qm.norm_M == doctest::Approx(0.996939).epsilon(5e-4));
    CHECK(qm.lambda_target == doctest::Approx(-200.0).epsilon(1e-4));
    // support stays inside B(v, 2 rho)
    const geom::Vec2 v = r.poly.vertices()[vi].position;
    for (int d = 0; d < p.n_dofs; ++d)
      if (qm.dof[d] != 0.0) CHECK((p.dof_points[d] - v).norm() < 2 * qm.inner_radius + 1e-12);
  }
  // at gamma = 12 the norm defect shrinks (oracle: 1 - 8.4e-4)
  const auto m12 = r.mesh_for(12.0);
  const auto p12 = fem::assemble(m12, 2);
  const auto qm12 = build_quasimode(r.poly, p12, r.model, 0, 1, 12.0);
  CHECK(qm12.norm_M * qm12.norm_M >= 1.0 - 2e-3);
}

TEST_CASE("quasi-modes at distinct corners are exactly M-orthogonal") {
  const auto& r = rig();
  const auto m = r.mesh_for(10.0);
  const auto p = fem::assemble(m, 2);
  const auto q0 = build_quasimode(r.poly, p, r.model, 0, 1, 10.0);
  const auto q1 = build_quasimode(r.poly, p, r.model, 1, 1, 10.0);
  // disjoint supports: overlap at the single touching point only, so the
  // discrete product is zero to machine precision
  CHECK(std::abs(q0.dof.dot(p.M * q1.dof)) <= 1e-14);
}

TEST_CASE("preconditions: overlapping supports and wedge exit are errors") {
  const auto& r = rig();
  const auto m = r.mesh_for(8.0);
  const auto p = fem::assemble(m, 2);
  // straight-polygon cutoff is gamma-independent (rho), so overlap cannot
  // trigger on the square; the curvilinear gamma^-beta cutoff does
  const auto bulge = geom::make_bulged_square(0.05);
  sector::SectorPolicy sp;
  auto bm = sector::build_model_sum(bulge, 1e-3, sp);
  mesh::GradingPolicy mp;
  mp.target_h = 0.05;
  mp.levels = 2;
  const auto bmesh = mesh_polygon(bulge, mp);
  const auto bp = fem::assemble(bmesh, 2);
  CHECK_THROWS_WITH_AS(
      (void)build_quasimode(bulge, bp, bm, 0, 1, 3.0),  // gamma^{-2/3} too fat
      doctest::Contains("supports overlap"), std::invalid_argument);
  // mode index beyond the model spectrum
  CHECK_THROWS(build_quasimode(r.poly, p, r.model, 0, 5, 8.0));
  // beta exponent outside (1/2, 1)
  CHECK_THROWS(build_quasimode(bulge, bp, bm, 0, 1, 12.0, 0.4));
}

TEST_CASE("residual of an exact discrete eigenpair is at solver level") {
  const auto& r = rig();
  const auto m = r.mesh_for(8.0);
  const auto p = fem::assemble(m, 2);
  quasimode::PencilOps ops(p);
  const auto res = eig::solve_lowest(p, 8.0, 1, 1e-11);
  CHECK(ops.residual(res.eigenvectors.col(0), 8.0, res.eigenvalues[0]) < 1e-6);
}

TEST_CASE("quasi-mode residuals shrink with gamma and Rayleigh sits above E_1") {
  const auto& r = rig();
  std::vector<double> etas;
  for (double gamma : {8.0, 10.0, 12.0}) {
    const auto m = r.mesh_for(gamma);
    const auto p = fem::assemble(m, 2);
    quasimode::PencilOps ops(p);
    double eta = 0;
    for (int vi : r.poly.convex_vertex_indices()) {
      const auto qm = build_quasimode(r.poly, p, r.model, vi, 1, gamma);
      eta = std::max(eta, residual(qm, ops, gamma));
      // min-max: any trial vector's Rayleigh quotient dominates E_1
      const auto res = eig::solve_lowest(p, gamma, 1, 1e-9);
      CHECK(fem::rayleigh(p, gamma, qm.dof) >= res.eigenvalues[0] - 1e-9);
    }
    etas.push_back(eta);
  }
  CHECK(etas[1] < etas[0]);
  CHECK(etas[2] < etas[1]);
}

TEST_CASE("certificate on the square at gamma = 10 verifies four eigenvalues") {
  const auto& r = rig();
  const auto m = r.mesh_for(10.0);
  const auto p = fem::assemble(m, 2);
  std::vector<QuasiMode> qms;
  for (int vi : r.poly.convex_vertex_indices())
    qms.push_back(build_quasimode(r.poly, p, r.model, vi, 1, 10.0));
  const auto cert = certify(qms, p, 10.0);
  CHECK(cert.n == 4);
  CHECK(cert.lambda == doctest::Approx(-200.0).epsilon(1e-4));
  CHECK(cert.beta_min > 0);
  CHECK(cert.beta_max >= cert.beta_min);
  CHECK(cert.halfwidth > 0);
  CHECK(cert.verified_count >= 4);
  // the inertia verification at the endpoints, audited directly
  const auto hi = eig::count_below(p, 10.0, cert.lambda + cert.halfwidth);
  const auto lo = eig::count_below(p, 10.0, cert.lambda - cert.halfwidth);
  CHECK(hi.count - lo.count == cert.verified_count);
  // Gramian entries near identity (disjoint supports, norms near 1)
  for (size_t i = 0; i < qms.size(); ++i)
    for (size_t j = 0; j < qms.size(); ++j) {
      const double g = qms[i].dof.dot(p.M * qms[j].dof);
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 0.05);
    }
  const std::string js = quasimode::certificate_json(cert);
  CHECK(js.find("\"halfwidth\"") != std::string::npos);
  CHECK(js.find("\"verified_count\"") != std::string::npos);
}

TEST_CASE("orthonormal family uses the sqrt(n) rule") {
  const auto& r = rig();
  const auto m = r.mesh_for(8.0);
  const auto p = fem::assemble(m, 2);
  const auto res = eig::solve_lowest(p, 8.0, 1, 1e-11);
  QuasiMode qm;
  qm.vertex = 0;
  qm.n = 1;
  qm.gamma = 8.0;
  qm.dof = res.eigenvectors.col(0);  // exactly M-normalized
  qm.lambda_target = res.eigenvalues[0];
  qm.norm_M = 1.0;
  const auto cert = certify({qm}, p, 8.0);
  CHECK(cert.orthonormal_rule);
  CHECK(cert.halfwidth == doctest::Approx(cert.eta));  // sqrt(1) * eta
  CHECK(cert.verified_count >= 1);
}

TEST_CASE("duplicate quasi-mode makes the Gramian singular") {
  const auto& r = rig();
  const auto m = r.mesh_for(10.0);
  const auto p = fem::assemble(m, 2);
  const auto qm = build_quasimode(r.poly, p, r.model, 0, 1, 10.0);
  CHECK_THROWS_WITH_AS((void)certify({qm, qm}, p, 10.0),
                       doctest::Contains("dependent"), std::runtime_error);
}

TEST_CASE("certify rejects mixed clusters") {
  const auto& r = rig();
  const auto m = r.mesh_for(10.0);
  const auto p = fem::assemble(m, 2);
  auto q0 = build_quasimode(r.poly, p, r.model, 0, 1, 10.0);
  auto q1 = build_quasimode(r.poly, p, r.model, 1, 1, 10.0);
  q1.lambda_target *= 1.5;
  CHECK_THROWS_WITH_AS((void)certify({q0, q1}, p, 10.0),
                       doctest::Contains("clusters"), std::invalid_argument);
}

TEST_CASE("subspace distance: identity, orthogonality, decay in gamma") {
  const auto& r = rig();
  std::vector<double> dist;
  for (double gamma : {8.0, 10.0, 12.0}) {
    const auto m = r.mesh_for(gamma);
    const auto p = fem::assemble(m, 2);
    const auto res = eig::solve_lowest(p, gamma, 5, 1e-10);
    const Eigen::MatrixXd E = res.eigenvectors.leftCols(4);
    CHECK(quasimode::subspace_distance(E, E, p.M) < 1e-7);
    // M-orthogonal complement direction: distance 1
    const Eigen::MatrixXd F5 = res.eigenvectors.col(4);
    CHECK(quasimode::subspace_distance(F5, E, p.M) == doctest::Approx(1.0).epsilon(1e-9));
    Eigen::MatrixXd F(p.n_dofs, 4);
    int c = 0;
    for (int vi : r.poly.convex_vertex_indices())
      F.col(c++) = build_quasimode(r.poly, p, r.model, vi, 1, gamma).dof;
    const double d = quasimode::subspace_distance(F, E, p.M);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    dist.push_back(d);
  }
  CHECK(dist[1] < dist[0]);
  CHECK(dist[2] < dist[1]);
  // rank deficiency
  const auto m = r.mesh_for(8.0);
  const auto p = fem::assemble(m, 2);
  Eigen::MatrixXd bad(p.n_dofs, 2);
  bad.col(0).setOnes();
  bad.col(1).setOnes();
  CHECK_THROWS(quasimode::subspace_distance(bad, bad, p.M));
}
