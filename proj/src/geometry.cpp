#include "robin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace robin::geom {

namespace {

constexpr double kClosureTol = 1e-12;
constexpr double kVertexAngleTol = 1e-8;

double wrap_positive(double angle) {
  const double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a < 0) a += two_pi;
  return a;
}

class Segment final : public Arc {
public:
  Segment(Vec2 a, Vec2 b) : a_(std::move(a)), b_(std::move(b)) {
    len_ = (b_ - a_).norm();
    if (len_ <= 0) throw std::invalid_argument("segment has zero length");
    dir_ = (b_ - a_) / len_;
  }
  double length() const override { return len_; }
  Vec2 point(double s) const override { return a_ + s * dir_; }
  Vec2 tangent(double) const override { return dir_; }
  double curvature(double) const override { return 0.0; }
  bool is_straight() const override { return true; }
  std::shared_ptr<Arc> reversed() const override {
    return std::make_shared<Segment>(b_, a_);
  }

private:
  Vec2 a_, b_, dir_;
  double len_;
};

class CircularArc final : public Arc {
public:
  CircularArc(Vec2 c, double r, double t0, double t1)
      : center_(std::move(c)), r_(r), t0_(t0), t1_(t1) {
    if (r <= 0) throw std::invalid_argument("circular arc needs radius > 0");
    if (t0 == t1) throw std::invalid_argument("circular arc has zero sweep");
    len_ = r_ * std::abs(t1_ - t0_);
  }
  double length() const override { return len_; }
  Vec2 point(double s) const override {
    const double t = theta(s);
    return center_ + r_ * Vec2(std::cos(t), std::sin(t));
  }
  Vec2 tangent(double s) const override {
    const double t = theta(s);
    const double sgn = (t1_ > t0_) ? 1.0 : -1.0;
    return sgn * Vec2(-std::sin(t), std::cos(t));
  }
  // Signed curvature with the loop orientation: +1/r when traversed CCW.
  double curvature(double) const override {
    return ((t1_ > t0_) ? 1.0 : -1.0) / r_;
  }
  std::shared_ptr<Arc> reversed() const override {
    return std::make_shared<CircularArc>(center_, r_, t1_, t0_);
  }

private:
  double theta(double s) const {
    const double sgn = (t1_ > t0_) ? 1.0 : -1.0;
    return t0_ + sgn * s / r_;
  }
  Vec2 center_;
  double r_, t0_, t1_, len_;
};

// Catmull-Rom spline through samples, reparametrized by arc length through a
// dense lookup table. Smooth enough that curvature is evaluated analytically
// in the chord parameter.
class SplineArc final : public Arc {
public:
  explicit SplineArc(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    if (pts_.size() < 3)
      throw std::invalid_argument("spline needs at least 3 samples");
    const int n = static_cast<int>(pts_.size());
    // chord-length parameter
    knots_.resize(n, 0.0);
    for (int i = 1; i < n; ++i) {
      knots_[i] = knots_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
      if (!((pts_[i] - pts_[i - 1]).norm() > 0))
        throw std::invalid_argument("spline has coincident samples");
    }
    tangents_.resize(n);
    for (int i = 0; i < n; ++i) {
      if (i == 0)
        tangents_[i] = (pts_[1] - pts_[0]) / (knots_[1] - knots_[0]);
      else if (i == n - 1)
        tangents_[i] = (pts_[n - 1] - pts_[n - 2]) / (knots_[n - 1] - knots_[n - 2]);
      else
        tangents_[i] = (pts_[i + 1] - pts_[i - 1]) / (knots_[i + 1] - knots_[i - 1]);
    }
    build_arclength_table();
  }

  double length() const override { return total_len_; }
  Vec2 point(double s) const override { return eval(t_of_s(s), 0); }
  Vec2 tangent(double s) const override {
    Vec2 d = eval(t_of_s(s), 1);
    return d / d.norm();
  }
  double curvature(double s) const override {
    const double t = t_of_s(s);
    const Vec2 d1 = eval(t, 1), d2 = eval(t, 2);
    const double sp = d1.norm();
    return (d1.x() * d2.y() - d1.y() * d2.x()) / (sp * sp * sp);
  }
  std::shared_ptr<Arc> reversed() const override {
    std::vector<Vec2> r(pts_.rbegin(), pts_.rend());
    return std::make_shared<SplineArc>(std::move(r));
  }

private:
  // Hermite evaluation on the segment containing t; deriv = 0,1,2.
  Vec2 eval(double t, int deriv) const {
    const int n = static_cast<int>(pts_.size());
    int seg = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), t) -
                               knots_.begin()) - 1;
    seg = std::clamp(seg, 0, n - 2);
    const double h = knots_[seg + 1] - knots_[seg];
    const double u = (t - knots_[seg]) / h;
    const Vec2 p0 = pts_[seg], p1 = pts_[seg + 1];
    const Vec2 m0 = tangents_[seg] * h, m1 = tangents_[seg + 1] * h;
    if (deriv == 0) {
      const double h00 = 2 * u * u * u - 3 * u * u + 1;
      const double h10 = u * u * u - 2 * u * u + u;
      const double h01 = -2 * u * u * u + 3 * u * u;
      const double h11 = u * u * u - u * u;
      return h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
    }
    if (deriv == 1) {
      const double h00 = 6 * u * u - 6 * u;
      const double h10 = 3 * u * u - 4 * u + 1;
      const double h01 = -6 * u * u + 6 * u;
      const double h11 = 3 * u * u - 2 * u;
      return (h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1) / h;
    }
    const double h00 = 12 * u - 6;
    const double h10 = 6 * u - 4;
    const double h01 = -12 * u + 6;
    const double h11 = 6 * u - 2;
    return (h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1) / (h * h);
  }

  void build_arclength_table() {
    const int n_table = 64 * static_cast<int>(pts_.size());
    table_t_.resize(n_table + 1);
    table_s_.resize(n_table + 1);
    const double t_max = knots_.back();
    table_s_[0] = 0.0;
    table_t_[0] = 0.0;
    double s = 0.0;
    Vec2 prev = eval(0.0, 0);
    for (int i = 1; i <= n_table; ++i) {
      const double t = t_max * i / n_table;
      // 3-point Gauss on [t_prev, t] of |P'(t)|
      const double t0 = table_t_[i - 1];
      const double hm = (t - t0) / 2, cm = (t + t0) / 2;
      const double g = std::sqrt(3.0 / 5.0);
      s += hm * (5.0 / 9.0 * eval(cm - hm * g, 1).norm() +
                 8.0 / 9.0 * eval(cm, 1).norm() +
                 5.0 / 9.0 * eval(cm + hm * g, 1).norm());
      table_t_[i] = t;
      table_s_[i] = s;
      prev = eval(t, 0);
    }
    (void)prev;
    total_len_ = s;
  }

  double t_of_s(double s) const {
    s = std::clamp(s, 0.0, total_len_);
    int lo = static_cast<int>(std::upper_bound(table_s_.begin(), table_s_.end(), s) -
                              table_s_.begin()) - 1;
    lo = std::clamp(lo, 0, static_cast<int>(table_s_.size()) - 2);
    const double f = (s - table_s_[lo]) / (table_s_[lo + 1] - table_s_[lo]);
    double t = table_t_[lo] + f * (table_t_[lo + 1] - table_t_[lo]);
    // Newton polish on s(t) - s = 0
    for (int it = 0; it < 8; ++it) {
      const double sp = eval(t, 1).norm();
      if (sp <= 0) break;
      const double ds = arclen_to(t) - s;
      const double step = ds / sp;
      t -= step;
      t = std::clamp(t, 0.0, knots_.back());
      if (std::abs(step) < 1e-14 * std::max(1.0, knots_.back())) break;
    }
    return t;
  }

  double arclen_to(double t) const {
    int lo = static_cast<int>(std::upper_bound(table_t_.begin(), table_t_.end(), t) -
                              table_t_.begin()) - 1;
    lo = std::clamp(lo, 0, static_cast<int>(table_t_.size()) - 2);
    const double t0 = table_t_[lo];
    const double hm = (t - t0) / 2, cm = (t + t0) / 2;
    const double g = std::sqrt(3.0 / 5.0);
    return table_s_[lo] + hm * (5.0 / 9.0 * eval(cm - hm * g, 1).norm() +
                                8.0 / 9.0 * eval(cm, 1).norm() +
                                5.0 / 9.0 * eval(cm + hm * g, 1).norm());
  }

  std::vector<Vec2> pts_;
  std::vector<double> knots_;
  std::vector<Vec2> tangents_;
  std::vector<double> table_t_, table_s_;
  double total_len_ = 0.0;
};

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross2(b - a, c - a);
    const double eps = 1e-14 * ((b - a).norm() + (c - a).norm() + 1.0);
    return (v > eps) - (v < -eps);
  };
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

std::shared_ptr<Arc> make_segment(const Vec2& a, const Vec2& b) {
  return std::make_shared<Segment>(a, b);
}

std::shared_ptr<Arc> make_circular_arc(const Vec2& center, double radius,
                                       double theta0, double theta1) {
  return std::make_shared<CircularArc>(center, radius, theta0, theta1);
}

std::shared_ptr<Arc> make_spline(const std::vector<Vec2>& samples) {
  return std::make_shared<SplineArc>(samples);
}

CurvilinearPolygon CurvilinearPolygon::build(std::vector<std::shared_ptr<Arc>> arcs) {
  if (arcs.empty()) throw std::invalid_argument("polygon needs at least one arc");

  const int m = static_cast<int>(arcs.size());
  for (int k = 0; k < m; ++k) {
    const Vec2 e = arcs[k]->end();
    const Vec2 s = arcs[(k + 1) % m]->start();
    if ((e - s).norm() > kClosureTol)
      throw std::invalid_argument("polygon arcs do not form a closed loop");
  }

  // Orientation from the sampled polyline (shoelace); reverse if clockwise.
  std::vector<Vec2> chain;
  std::vector<std::pair<int, int>> chain_seg;  // (arc, sample) provenance
  for (int k = 0; k < m; ++k) {
    const int n = std::max(8, static_cast<int>(std::ceil(arcs[k]->length() / 0.02)));
    const int ns = std::min(n, 512);
    for (int j = 0; j < ns; ++j) {
      chain.push_back(arcs[k]->point(arcs[k]->length() * j / ns));
      chain_seg.emplace_back(k, j);
    }
  }
  double area2 = 0.0;
  for (size_t i = 0; i < chain.size(); ++i)
    area2 += cross2(chain[i], chain[(i + 1) % chain.size()]);
  if (std::abs(area2) < 1e-14)
    throw std::invalid_argument("degenerate polygon (zero area)");
  if (area2 < 0) {
    std::vector<std::shared_ptr<Arc>> rev;
    for (auto it = arcs.rbegin(); it != arcs.rend(); ++it) rev.push_back((*it)->reversed());
    return build(std::move(rev));
  }

  // Self-intersection scan on the sampled chain (non-adjacent pairs).
  const size_t nc = chain.size();
  for (size_t i = 0; i < nc; ++i) {
    for (size_t j = i + 2; j < nc; ++j) {
      if (i == 0 && j == nc - 1) continue;
      if (segments_intersect(chain[i], chain[(i + 1) % nc], chain[j], chain[(j + 1) % nc]))
        throw std::invalid_argument("polygon boundary self-intersects");
    }
  }

  CurvilinearPolygon poly;
  poly.arcs_ = arcs;
  for (const auto& a : arcs) poly.perimeter_ += a->length();

  // Junction analysis: a vertex where the one-sided tangents differ.
  for (int k = 0; k < m; ++k) {
    const int kn = (k + 1) % m;
    const Vec2 t_in = arcs[k]->tangent(arcs[k]->length());
    const Vec2 t_out = arcs[kn]->tangent(0.0);
    const double turn = std::atan2(cross2(t_in, t_out), t_in.dot(t_out));
    if (std::abs(turn) <= kVertexAngleTol) continue;  // regular junction
    if (std::abs(std::abs(turn) - std::numbers::pi) <= kVertexAngleTol)
      throw std::invalid_argument("cusp (zero opening angle) at arc junction");
    Vertex v;
    v.position = arcs[kn]->start();
    // Interior opening 2*alpha measured CCW from the outgoing ray to the
    // reversed incoming ray.
    const Vec2 ray1 = t_out, ray2 = -t_in;
    double two_alpha = wrap_positive(std::atan2(ray2.y(), ray2.x()) -
                                     std::atan2(ray1.y(), ray1.x()));
    v.half_angle = 0.5 * two_alpha;
    v.is_convex = v.half_angle < std::numbers::pi / 2;
    v.arc_in = k;
    v.arc_out = kn;
    poly.vertices_.push_back(v);
  }

  // rho_v: half distance to the nearest other vertex.
  const auto& vs = poly.vertices_;
  for (size_t i = 0; i < vs.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < vs.size(); ++j)
      if (j != i) d = std::min(d, (vs[i].position - vs[j].position).norm());
    poly.vertices_[i].rho = d / 2.0;
  }
  return poly;
}

std::vector<int> CurvilinearPolygon::convex_vertex_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(vertices_.size()); ++i)
    if (vertices_[i].is_convex) out.push_back(i);
  return out;
}

bool CurvilinearPolygon::has_nonconvex_vertex() const {
  for (const auto& v : vertices_)
    if (!v.is_convex) return true;
  return false;
}

bool CurvilinearPolygon::is_straight() const {
  for (const auto& a : arcs_)
    if (!a->is_straight()) return false;
  return true;
}

RigidFrame CurvilinearPolygon::tangent_frame(int vertex_index) const {
  if (vertex_index < 0 || vertex_index >= static_cast<int>(vertices_.size()))
    throw std::invalid_argument("tangent_frame: not a vertex of the polygon");
  const Vertex& v = vertices_[vertex_index];
  const Vec2 t_in = arcs_[v.arc_in]->tangent(arcs_[v.arc_in]->length());
  const Vec2 t_out = arcs_[v.arc_out]->tangent(0.0);
  const Vec2 ray1 = t_out;
  (void)t_in;
  const double phi1 = std::atan2(ray1.y(), ray1.x());
  const double bisector = phi1 + v.half_angle;
  RigidFrame f;
  const double c = std::cos(-bisector), s = std::sin(-bisector);
  f.rotation << c, -s, s, c;
  f.vertex = v.position;
  return f;
}

namespace {

// Adaptive Simpson with a depth cap; f must be bounded.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 40);
}

}  // namespace

double curvature_integral(const CurvilinearPolygon& poly, double lambda, double abs_tol) {
  double total = 0.0;
  const double per_arc = abs_tol / std::max<size_t>(1, poly.arcs().size());
  for (const auto& arc : poly.arcs()) {
    const auto f = [&](double s) {
      const double v = arc->curvature(s) + lambda;
      return v > 0 ? std::sqrt(v) : 0.0;
    };
    if (arc->is_straight()) {
      total += (lambda > 0 ? std::sqrt(lambda) : 0.0) * arc->length();
      continue;
    }
    total += integrate(f, 0.0, arc->length(), per_arc);
  }
  return total;
}

CurvilinearPolygon make_square(double side) {
  const Vec2 p0(0, 0), p1(side, 0), p2(side, side), p3(0, side);
  return CurvilinearPolygon::build(
      {make_segment(p0, p1), make_segment(p1, p2), make_segment(p2, p3), make_segment(p3, p0)});
}

CurvilinearPolygon make_regular_polygon(int n_sides, double side) {
  if (n_sides < 3) throw std::invalid_argument("regular polygon needs >= 3 sides");
  const double r = side / (2.0 * std::sin(std::numbers::pi / n_sides));
  std::vector<std::shared_ptr<Arc>> arcs;
  for (int k = 0; k < n_sides; ++k) {
    const double a0 = 2 * std::numbers::pi * k / n_sides;
    const double a1 = 2 * std::numbers::pi * (k + 1) / n_sides;
    arcs.push_back(make_segment(r * Vec2(std::cos(a0), std::sin(a0)),
                                r * Vec2(std::cos(a1), std::sin(a1))));
  }
  return CurvilinearPolygon::build(std::move(arcs));
}

CurvilinearPolygon make_lshape(double leg) {
  // Six corners, one reentrant (interior angle 3*pi/2).
  const double a = leg;
  const std::vector<Vec2> pts = {{0, 0}, {2 * a, 0}, {2 * a, a}, {a, a}, {a, 2 * a}, {0, 2 * a}};
  std::vector<std::shared_ptr<Arc>> arcs;
  for (size_t i = 0; i < pts.size(); ++i)
    arcs.push_back(make_segment(pts[i], pts[(i + 1) % pts.size()]));
  return CurvilinearPolygon::build(std::move(arcs));
}

CurvilinearPolygon make_disk(double radius) {
  return CurvilinearPolygon::build(
      {make_circular_arc(Vec2(0, 0), radius, 0.0, 2 * std::numbers::pi)});
}

CurvilinearPolygon make_bulged_square(double sagitta) {
  if (sagitta <= 0 || sagitta >= 0.5)
    throw std::invalid_argument("bulged square: sagitta must be in (0, 0.5)");
  // Each unit edge becomes a circular arc through the outward-shifted midpoint.
  const double c = 0.5;  // half chord
  const double r = (c * c + sagitta * sagitta) / (2 * sagitta);
  const std::vector<Vec2> corners = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<std::shared_ptr<Arc>> arcs;
  for (int k = 0; k < 4; ++k) {
    const Vec2 p = corners[k], q = corners[(k + 1) % 4];
    const Vec2 mid = 0.5 * (p + q);
    const Vec2 out = Vec2((q - p).y(), -(q - p).x()).normalized();  // outward normal
    const Vec2 center = mid + (sagitta - r) * out;
    const double t0 = std::atan2(p.y() - center.y(), p.x() - center.x());
    double t1 = std::atan2(q.y() - center.y(), q.x() - center.x());
    while (t1 <= t0) t1 += 2 * std::numbers::pi;  // CCW sweep
    arcs.push_back(make_circular_arc(center, r, t0, t1));
  }
  return CurvilinearPolygon::build(std::move(arcs));
}

CurvilinearPolygon parse_polygon_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::shared_ptr<Arc>> arcs;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    if (kind == "segment") {
      double x0, y0, x1, y1;
      if (!(ls >> x0 >> y0 >> x1 >> y1))
        throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                    ": segment needs 4 numbers");
      arcs.push_back(make_segment({x0, y0}, {x1, y1}));
    } else if (kind == "circarc") {
      double cx, cy, r, t0, t1;
      if (!(ls >> cx >> cy >> r >> t0 >> t1))
        throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                    ": circarc needs 5 numbers");
      arcs.push_back(make_circular_arc({cx, cy}, r, t0, t1));
    } else if (kind == "spline") {
      std::vector<Vec2> samples;
      while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        if (first == "end") break;
        if (first[0] == '#') continue;
        double x = std::stod(first), y;
        if (!(ss >> y))
          throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                      ": spline sample needs 2 numbers");
        samples.emplace_back(x, y);
      }
      arcs.push_back(make_spline(samples));
    } else {
      throw std::invalid_argument("polygon file line " + std::to_string(lineno) +
                                  ": unknown arc kind '" + kind + "'");
    }
  }
  return CurvilinearPolygon::build(std::move(arcs));
}

CurvilinearPolygon parse_polygon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open polygon file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_polygon_text(ss.str());
}

}  // namespace robin::geom
