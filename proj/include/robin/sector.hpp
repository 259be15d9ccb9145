#pragma once

#include "robin/eig.hpp"
#include "robin/geometry.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace robin::sector {

using geom::Vec2;

struct SectorPolicy {
  double tip_h = 0.0;  // radial spacing at the tip; 0 chooses from alpha
  int refinements = 2;
  int order = 2;
  long long node_cap = 2000000;
  double eps = 0.1;     // epsilon in the decay-driven radius rule
  double tail = 1e-8;   // truncation tail amplitude
  double radius_override = 0;  // >0: use this R instead of the decay rule
  std::string cache_dir;  // disk cache for spectra; empty disables
};

/// Point evaluator for eigenfunctions of the reference sector problem on the
/// truncated mesh: P1/P2 interpolation with angular clamping onto the sector
/// and zero beyond the truncation radius.
class SectorEval {
public:
  SectorEval() = default;
  SectorEval(double alpha, mesh::TriMesh mesh, const fem::SpectralPencil& pencil,
             Eigen::MatrixXd vectors);

  /// Value of mode `n` (1-based) at a point of the reference sector.
  double value(int n, const Vec2& u) const;
  double radius() const { return radius_; }
  int modes() const { return static_cast<int>(vectors_.cols()); }

private:
  int locate(const Vec2& p, double bary[3]) const;

  double alpha_ = 0;
  double radius_ = 0;
  mesh::TriMesh mesh_;
  Eigen::MatrixXd vectors_;
  int order_ = 2;
  std::vector<int> dof_of_node_, dof_of_edge_;
  std::vector<std::pair<int, int>> edges_;
  std::map<std::pair<int, int>, int> edge_slot_;
  // uniform grid of candidate triangles for point location
  double cell_ = 1, x0_ = 0, y0_ = 0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

struct SectorSpectrum {
  double alpha = 0;
  double truncation_radius = 0;  // base R; the reported solve ran at 2R
  std::vector<double> eigenvalues;  // kept: below the essential-spectrum cutoff
  std::vector<double> truncation_error_estimate;  // E(R) - E(2R)
  std::vector<double> mesh_error_estimate;        // last refinement shift
  int count = 0;     // N_v, stable under R-doubling unless count_stable is false
  bool count_stable = true;
  double cutoff = -1;  // eigenvalues above this were discarded
  std::vector<std::string> warnings;
  std::shared_ptr<SectorEval> eval;  // eigenfunctions on the 2R mesh

  double uncertainty(int i) const {
    return std::abs(truncation_error_estimate[i]) + std::abs(mesh_error_estimate[i]);
  }
};

/// Discrete spectrum of the reference sector operator below the essential
/// threshold -1, on the Dirichlet-truncated sector, with the truncation radius
/// chosen from the eigenfunction decay rate and verified by R-doubling.
/// For alpha >= pi/2 the spectrum is empty.
SectorSpectrum sector_spectrum(double alpha, double tol, const SectorPolicy& policy = {});

struct ScalingReport {
  double gamma = 1;
  double max_rel_error = 0;
  int n_compared = 0;
  bool pass = false;
};

/// Discrete-level check that the gamma problem on the 1/gamma-scaled mesh has
/// eigenvalues exactly gamma^2 times the reference ones.
ScalingReport scaling_check(double alpha, double gamma);

struct ClusterEntry {
  double lambda = 0;                          // cluster value (mean of members)
  int multiplicity = 0;                       // m_l
  std::vector<std::pair<int, int>> members;   // (n, vertex index), n 1-based
};

struct ModelSum {
  std::map<long long, std::shared_ptr<SectorSpectrum>> by_alpha_key;
  std::map<int, long long> vertex_alpha_key;  // convex vertex -> spectrum key
  int N_total = 0;                            // N^+
  std::vector<ClusterEntry> clusters;         // ascending lambda
  double E_max = 0;                           // E_{N^+} of the model sum
  double cluster_tol = 0;
  std::vector<std::string> warnings;

  const SectorSpectrum& spectrum_at(int vertex) const {
    return *by_alpha_key.at(vertex_alpha_key.at(vertex));
  }
};

/// Sector spectra for every convex vertex (cached per half-angle), merged
/// into the model-sum clusters.
ModelSum build_model_sum(const geom::CurvilinearPolygon& poly, double tol,
                         const SectorPolicy& policy = {});

}  // namespace robin::sector
