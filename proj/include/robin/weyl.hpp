#pragma once

#include "robin/eig.hpp"
#include "robin/geometry.hpp"
#include "robin/sector.hpp"

#include <string>
#include <vector>

namespace robin::weyl {

struct CountingPolicy {
  double interior_h = 0.08;   // far-field mesh size
  double band_mult = 3.0;     // refined band reaches band_mult / gamma
  double hb_mult = 10.0;      // boundary size 1 / (hb_mult * gamma)
  int ladder = 3;             // meshes at h_b * {2^(ladder-1) ... 1}
  double grade_slope = 0.35;  // layer size at distance d: max(h_b, slope * d)
  int order = 2;
  long long node_cap = 200000;
  int corner_levels = 0;      // extra grading beyond the boundary band
};

struct WeylRow {
  double gamma = 0;
  double threshold = 0;
  long long count = 0;
  double prediction = 0;
  double deviation = 0;
  long long mesh_nodes = 0;
  bool stabilized = false;
  double h_boundary = 0;
};

struct WeylReport {
  std::string regime;      // "bulk" or "edge"
  double parameter = 0;    // E or lambda
  std::vector<WeylRow> rows;
  double fitted_exponent = 0;  // slope of log(count) vs log(gamma)
};

/// Counts below E gamma^2 on gamma-adapted boundary-layer meshes and compares
/// with gamma |dOmega| sqrt(E+1) / pi.
WeylReport weyl_bulk(const geom::CurvilinearPolygon& poly, double E,
                     const std::vector<double>& gammas, const CountingPolicy& policy = {});

/// Counts below -gamma^2 + lambda gamma and compares with
/// (sqrt(gamma)/pi) * integral of sqrt((kappa + lambda)_+).
WeylReport weyl_edge(const geom::CurvilinearPolygon& poly, double lambda,
                     const std::vector<double>& gammas, const CountingPolicy& policy = {});

struct TailRow {
  double gamma = 0;
  double value = 0;  // E_{N+j}
  double ratio = 0;  // E_{N+j} / gamma^2
  long long mesh_nodes = 0;
};

struct TailReport {
  int j = 1;
  int n_model = 0;  // N^+ of the model sum
  std::vector<TailRow> rows;
  double limit_estimate = 0;  // extrapolated ratio
};

/// E_{N+ + j} over the sweep; its ratio to -gamma^2 trends to -1.
TailReport tail_bracket(const geom::CurvilinearPolygon& poly, int j,
                        const std::vector<double>& gammas, const CountingPolicy& policy = {},
                        const sector::SectorPolicy& sector_policy = {});

/// Least-squares slope of log(y) against log(x); requires positive y.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace robin::weyl
