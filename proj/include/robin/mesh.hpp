#pragma once

#include "robin/geometry.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace robin::mesh {

using geom::Vec2;

enum class BoundaryTag : int { Robin = 1, Dirichlet = 2 };

/// Boundary edge (a,b) in loop orientation. When the edge lies on a curved
/// arc, `curve` indexes TriMesh::curves and [s0,s1] is the arc-length span,
/// so refinement can snap new midpoints onto the exact arc.
struct BoundaryEdge {
  int a = -1, b = -1;
  BoundaryTag tag = BoundaryTag::Robin;
  int curve = -1;
  double s0 = 0.0, s1 = 0.0;
};

struct GradingPolicy {
  double target_h = 0.1;
  double corner_radius = 0.0;  // 0: use min_v rho_v
  double ratio = 0.5;          // per-level size factor, in (0,1)
  int levels = 0;
  long long node_cap = 2000000;
};

struct TriMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> tris;  // CCW
  std::vector<BoundaryEdge> bedges;
  std::vector<std::shared_ptr<const geom::Arc>> curves;

  long long n_nodes() const { return static_cast<long long>(nodes.size()); }
  long long n_tris() const { return static_cast<long long>(tris.size()); }

  double tri_area(int t) const;
  double min_angle_deg() const;
  double total_area() const;
  double boundary_length(BoundaryTag tag) const;
  std::vector<char> node_boundary_flags() const;  // 0 interior, 1 Robin, 2 Dirichlet
  /// Throws if a triangle is inverted or the boundary is inconsistent
  /// (an edge shared by != 1 triangle, or loops not closed).
  void validate() const;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Conforming triangulation of the polygon: coarse ear-clip + edge flips,
/// uniform refinement until every edge is at most target_h (boundary
/// midpoints snapped to the exact arcs), then geometric grading toward each
/// convex vertex inside corner_radius. All boundary edges are Robin.
TriMesh mesh_polygon(const geom::CurvilinearPolygon& poly, const GradingPolicy& policy);

/// Mesh of the truncated sector U(alpha) ∩ B(0,R): structured polar layout,
/// radial spacing growing geometrically away from the tip. The two straight
/// sides are Robin, the outer arc Dirichlet.
TriMesh mesh_truncated_sector(const geom::SectorGeometry& sec, const GradingPolicy& policy);

/// Splits every triangle into 4 by edge midpoints; boundary midpoints of
/// curved edges are snapped to the exact arc; tags inherited.
TriMesh refine_uniform(const TriMesh& in, long long node_cap = 2000000);

/// Conforming local refinement (recursive longest-edge bisection): bisects
/// marked triangles, plus whatever neighbors conformity requires, until no
/// marked triangle remains. `want_split(t)` is re-evaluated as the mesh
/// changes.
void refine_where(TriMesh& m, const std::function<bool(const TriMesh&, int)>& want_split,
                  long long node_cap = 2000000);

/// Refines so triangles within `band` of the boundary polyline have diameter
/// at most max(h_band, grade_slope * dist): a flat layer for grade_slope = 0,
/// otherwise sizes grow linearly away from the boundary.
void refine_boundary_layer(TriMesh& m, double band, double h_band,
                           long long node_cap = 2000000, double grade_slope = 0.0);

// Triangle-format persistence (.node/.ele/.poly, 1-based, markers 1=Robin,
// 2=Dirichlet). `base` is the path without extension.
void export_mesh(const TriMesh& m, const std::string& base);
TriMesh import_mesh(const std::string& base);

}  // namespace robin::mesh
