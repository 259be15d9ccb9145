#include "robin/weyl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace robin::weyl {

namespace {

// Ladder of boundary-layer meshes, coarsest to finest; the finest resolves
// h_b = 1/(hb_mult * gamma) inside the band band_mult/gamma.
std::vector<mesh::TriMesh> mesh_ladder(const geom::CurvilinearPolygon& poly, double gamma,
                                       const CountingPolicy& policy) {
  mesh::GradingPolicy base;
  base.target_h = policy.interior_h;
  base.levels = policy.corner_levels;
  base.node_cap = policy.node_cap;
  mesh::TriMesh m = mesh_polygon(poly, base);

  const double band = policy.band_mult / gamma;
  const double hb = 1.0 / (policy.hb_mult * gamma);
  std::vector<mesh::TriMesh> ladder;
  for (int j = policy.ladder - 1; j >= 0; --j) {
    const double target = hb * std::pow(2.0, j);
    if (target < policy.interior_h)
      mesh::refine_boundary_layer(m, band, target, policy.node_cap, policy.grade_slope);
    ladder.push_back(m);
  }
  return ladder;
}

WeylReport run_counts(const geom::CurvilinearPolygon& poly, const std::string& regime,
                      double parameter, const std::vector<double>& gammas,
                      const CountingPolicy& policy,
                      const std::function<double(double)>& threshold_of,
                      const std::function<double(double)>& prediction_of) {
  WeylReport rep;
  rep.regime = regime;
  rep.parameter = parameter;
  for (double gamma : gammas) {
    const auto ladder = mesh_ladder(poly, gamma, policy);
    std::vector<long long> counts;
    for (const auto& m : ladder) {
      fem::SpectralPencil p = fem::assemble(m, policy.order);
      counts.push_back(eig::count_below(p, gamma, threshold_of(gamma)).count);
    }
    WeylRow row;
    row.gamma = gamma;
    row.threshold = threshold_of(gamma);
    row.count = counts.back();
    row.prediction = prediction_of(gamma);
    row.deviation = static_cast<double>(row.count) - row.prediction;
    row.mesh_nodes = ladder.back().n_nodes();
    row.stabilized =
        counts.size() >= 2 && counts[counts.size() - 1] == counts[counts.size() - 2];
    row.h_boundary = 1.0 / (policy.hb_mult * gamma);
    rep.rows.push_back(row);
  }
  std::vector<double> xs, ys;
  for (const auto& r : rep.rows)
    if (r.count > 0) {
      xs.push_back(r.gamma);
      ys.push_back(static_cast<double>(r.count));
    }
  rep.fitted_exponent = xs.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
  return rep;
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0))
      throw std::invalid_argument("loglog_slope needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

WeylReport weyl_bulk(const geom::CurvilinearPolygon& poly, double E,
                     const std::vector<double>& gammas, const CountingPolicy& policy) {
  if (!(E > -1 && E < 0)) throw std::invalid_argument("weyl_bulk: E must lie in (-1, 0)");
  const double per = poly.perimeter();
  return run_counts(
      poly, "bulk", E, gammas, policy,
      [E](double g) { return E * g * g; },
      [E, per](double g) { return g * per * std::sqrt(E + 1.0) / std::numbers::pi; });
}

WeylReport weyl_edge(const geom::CurvilinearPolygon& poly, double lambda,
                     const std::vector<double>& gammas, const CountingPolicy& policy) {
  const double integral = geom::curvature_integral(poly, lambda);
  return run_counts(
      poly, "edge", lambda, gammas, policy,
      [lambda](double g) { return -g * g + lambda * g; },
      [integral](double g) { return std::sqrt(g) / std::numbers::pi * integral; });
}

TailReport tail_bracket(const geom::CurvilinearPolygon& poly, int j,
                        const std::vector<double>& gammas, const CountingPolicy& policy,
                        const sector::SectorPolicy& sector_policy) {
  if (j < 1) throw std::invalid_argument("tail_bracket: j must be >= 1");
  const sector::ModelSum model = sector::build_model_sum(poly, 1e-3, sector_policy);
  TailReport rep;
  rep.j = j;
  rep.n_model = model.N_total;

  for (double gamma : gammas) {
    mesh::GradingPolicy base;
    base.target_h = policy.interior_h;
    base.node_cap = policy.node_cap;
    // corner concentration scale 1/gamma with ~10 cells
    base.levels = std::max(
        0, static_cast<int>(std::ceil(std::log2(std::max(1.0, gamma * base.target_h * 10)))));
    mesh::TriMesh m = mesh_polygon(poly, base);
    // tail eigenfunctions live in a boundary layer of depth 1/gamma
    mesh::refine_boundary_layer(m, policy.band_mult / gamma, 0.4 / gamma, policy.node_cap,
                                policy.grade_slope);

    fem::SpectralPencil p = fem::assemble(m, policy.order);
    eig::SolveOptions so;
    if (model.N_total > 0)
      so.shift_hint = 1.25 * gamma * gamma * model.clusters.front().lambda;
    const int want = model.N_total + j;
    eig::EigenResult res = eig::solve_lowest(p, gamma, want, 1e-9, so);
    TailRow row;
    row.gamma = gamma;
    row.value = res.eigenvalues[want - 1];
    row.ratio = row.value / (gamma * gamma);
    row.mesh_nodes = m.n_nodes();
    rep.rows.push_back(row);
  }
  rep.limit_estimate = rep.rows.back().ratio;
  return rep;
}

}  // namespace robin::weyl
