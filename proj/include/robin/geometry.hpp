#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace robin::geom {

using Vec2 = Eigen::Vector2d;

/// One boundary arc, parametrized by arc length s in [0, length()].
/// Orientation follows the boundary loop (domain interior on the left).
class Arc {
public:
  virtual ~Arc() = default;

  virtual double length() const = 0;
  virtual Vec2 point(double s) const = 0;
  virtual Vec2 tangent(double s) const = 0;  // unit tangent
  virtual double curvature(double s) const = 0;
  virtual bool is_straight() const { return false; }
  virtual std::shared_ptr<Arc> reversed() const = 0;

  Vec2 start() const { return point(0.0); }
  Vec2 end() const { return point(length()); }
};

std::shared_ptr<Arc> make_segment(const Vec2& a, const Vec2& b);
/// Circular arc around `center`, traversed from angle theta0 to theta1
/// (counterclockwise when theta1 > theta0).
std::shared_ptr<Arc> make_circular_arc(const Vec2& center, double radius,
                                       double theta0, double theta1);
/// Catmull-Rom spline through the given samples, reparametrized by arc length.
std::shared_ptr<Arc> make_spline(const std::vector<Vec2>& samples);

struct Vertex {
  Vec2 position = Vec2::Zero();
  double half_angle = 0.0;  // alpha in (0,pi), never pi/2
  bool is_convex = false;   // alpha < pi/2
  double rho = 0.0;         // dist to nearest other vertex / 2
  int arc_in = -1;          // arc ending at this vertex
  int arc_out = -1;         // arc starting at this vertex
};

/// Rigid map x -> R (x - v) carrying the corner wedge at v onto the
/// reference sector U(alpha) = { |arg| < alpha }.
struct RigidFrame {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Vec2 vertex = Vec2::Zero();
  Vec2 apply(const Vec2& x) const { return rotation * (x - vertex); }
};

struct SectorGeometry {
  double half_angle = 0.0;       // alpha in (0, pi)
  double truncation_radius = 0;  // R > 0
};

class CurvilinearPolygon {
public:
  /// Builds the polygon from an ordered chain of arcs forming one closed
  /// non-self-intersecting loop. Junctions where the one-sided tangents agree
  /// (within 1e-8 rad) are regular points, not vertices. Throws on a
  /// non-closed loop, self-intersection or a cusp.
  static CurvilinearPolygon build(std::vector<std::shared_ptr<Arc>> arcs);

  const std::vector<std::shared_ptr<Arc>>& arcs() const { return arcs_; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  std::vector<int> convex_vertex_indices() const;
  double perimeter() const { return perimeter_; }
  bool has_nonconvex_vertex() const;
  bool is_straight() const;  // every arc a segment

  RigidFrame tangent_frame(int vertex_index) const;

private:
  std::vector<std::shared_ptr<Arc>> arcs_;
  std::vector<Vertex> vertices_;
  double perimeter_ = 0.0;
};

/// Integral over the boundary of sqrt((kappa(s) + lambda)_+), by adaptive
/// quadrature to absolute tolerance abs_tol.
double curvature_integral(const CurvilinearPolygon& poly, double lambda,
                          double abs_tol = 1e-8);

// Canned domains used by the test suites and the CLI examples.
CurvilinearPolygon make_square(double side = 1.0);
CurvilinearPolygon make_regular_polygon(int n_sides, double side = 1.0);
CurvilinearPolygon make_lshape(double leg = 1.0);
CurvilinearPolygon make_disk(double radius = 1.0);
/// Square with every edge replaced by a circular arc bulging outward by
/// `sagitta`; the four corners stay convex for moderate sagitta.
CurvilinearPolygon make_bulged_square(double sagitta);

/// Reads the polygon description format: one arc per line,
///   segment x0 y0 x1 y1
///   circarc cx cy r theta0 theta1
///   spline ... (sample rows) ... end
CurvilinearPolygon parse_polygon_file(const std::string& path);
CurvilinearPolygon parse_polygon_text(const std::string& text);

}  // namespace robin::geom
