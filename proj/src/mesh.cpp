#include "robin/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace robin::mesh {

namespace {

using EdgeKey = std::uint64_t;

EdgeKey ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<EdgeKey>(a) << 32) | static_cast<EdgeKey>(b);
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * cross2(b - a, c - a);
}

double tri_min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 e0 = b - a, e1 = c - b, e2 = a - c;
  const double a0 = std::atan2(std::abs(cross2(e0, -e2)), e0.dot(-e2));
  const double a1 = std::atan2(std::abs(cross2(e1, -e0)), e1.dot(-e0));
  const double a2 = std::atan2(std::abs(cross2(e2, -e1)), e2.dot(-e1));
  return std::min({a0, a1, a2});
}

struct EdgeUse {
  int t[2] = {-1, -1};
  void add(int id) { (t[0] == -1 ? t[0] : t[1]) = id; }
  void remove(int id) {
    if (t[0] == id) t[0] = t[1];
    t[1] = -1;
  }
  int other(int id) const { return t[0] == id ? t[1] : t[0]; }
  int count() const { return (t[0] != -1) + (t[1] != -1); }
};

using EdgeMap = std::unordered_map<EdgeKey, EdgeUse>;

EdgeMap build_edge_map(const TriMesh& m) {
  EdgeMap em;
  em.reserve(3 * m.tris.size());
  for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
    for (int j = 0; j < 3; ++j)
      em[ekey(m.tris[t][j], m.tris[t][(j + 1) % 3])].add(t);
  return em;
}

void detach_tri(EdgeMap& em, const TriMesh& m, int t) {
  for (int j = 0; j < 3; ++j) em[ekey(m.tris[t][j], m.tris[t][(j + 1) % 3])].remove(t);
}

void attach_tri(EdgeMap& em, const TriMesh& m, int t) {
  for (int j = 0; j < 3; ++j) em[ekey(m.tris[t][j], m.tris[t][(j + 1) % 3])].add(t);
}

// Longest edge of triangle t, deterministic tie-break by node indices.
int longest_edge_of(const TriMesh& m, int t) {
  int best = 0;
  double best_len = -1;
  EdgeKey best_key = 0;
  for (int j = 0; j < 3; ++j) {
    const int a = m.tris[t][j], b = m.tris[t][(j + 1) % 3];
    const double len = (m.nodes[a] - m.nodes[b]).squaredNorm();
    const EdgeKey k = ekey(a, b);
    if (len > best_len + 1e-30 || (std::abs(len - best_len) <= 1e-30 && k > best_key)) {
      best = j;
      best_len = len;
      best_key = k;
    }
  }
  return best;
}

double tri_diam(const TriMesh& m, int t) {
  double d = 0;
  for (int j = 0; j < 3; ++j)
    d = std::max(d, (m.nodes[m.tris[t][j]] - m.nodes[m.tris[t][(j + 1) % 3]]).norm());
  return d;
}

// --- Bowyer-Watson Delaunay triangulation with walking point location ---
class Delaunay {
public:
  explicit Delaunay(const std::vector<Vec2>& points) : pts_(points) {
    Vec2 lo = pts_[0], hi = lo;
    for (const auto& p : pts_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec2 c = 0.5 * (lo + hi);
    const double r = std::max(1e-12, (hi - lo).norm()) * 8.0;
    const int base = static_cast<int>(pts_.size());
    pts_.push_back(c + Vec2(-2 * r, -r));
    pts_.push_back(c + Vec2(2 * r, -r));
    pts_.push_back(c + Vec2(0, 2 * r));
    tris_.push_back({base, base + 1, base + 2});
    adj_.push_back({-1, -1, -1});
    alive_.push_back(1);

    // row-major insertion order for walk locality
    const double cell = std::max(1e-12, (hi - lo).maxCoeff() / 64.0);
    std::vector<int> order(points.size());
    for (size_t i = 0; i < points.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const long long ra = std::llround(points[a].y() / cell);
      const long long rb = std::llround(points[b].y() / cell);
      if (ra != rb) return ra < rb;
      return points[a].x() < points[b].x();
    });
    int hint = 0;
    for (int i : order) hint = insert(i, hint);
  }

  // triangles on the original points only, CCW
  std::vector<std::array<int, 3>> result(int n_points) const {
    std::vector<std::array<int, 3>> out;
    for (size_t t = 0; t < tris_.size(); ++t) {
      if (!alive_[t]) continue;
      const auto& tr = tris_[t];
      if (tr[0] >= n_points || tr[1] >= n_points || tr[2] >= n_points) continue;
      out.push_back(tr);
    }
    return out;
  }

private:
  bool incircle(int t, const Vec2& p) const {
    const Vec2 a = pts_[tris_[t][0]] - p;
    const Vec2 b = pts_[tris_[t][1]] - p;
    const Vec2 c = pts_[tris_[t][2]] - p;
    const long double a2 = (long double)a.x() * a.x() + (long double)a.y() * a.y();
    const long double b2 = (long double)b.x() * b.x() + (long double)b.y() * b.y();
    const long double c2 = (long double)c.x() * c.x() + (long double)c.y() * c.y();
    const long double det = a2 * ((long double)b.x() * c.y() - (long double)b.y() * c.x()) -
                            b2 * ((long double)a.x() * c.y() - (long double)a.y() * c.x()) +
                            c2 * ((long double)a.x() * b.y() - (long double)a.y() * b.x());
    const long double scale = std::max({a2, b2, c2});
    return det > 1e-20L * scale * scale;
  }

  int locate(const Vec2& p, int hint) const {
    int t = hint;
    for (int step = 0; step < 4 * static_cast<int>(tris_.size()) + 8; ++step) {
      if (!alive_[t]) break;
      int cross = -1;
      double worst = -1e-14;
      for (int j = 0; j < 3; ++j) {
        const Vec2 a = pts_[tris_[t][j]], b = pts_[tris_[t][(j + 1) % 3]];
        const double s = cross2(b - a, p - a);
        const double eps = -1e-14 * ((b - a).squaredNorm() + (p - a).squaredNorm() + 1);
        if (s < eps && s < worst) {
          worst = s;
          cross = j;
        }
      }
      if (cross < 0) return t;
      const int nb = adj_[t][cross];
      if (nb < 0) break;
      t = nb;
    }
    for (size_t i = 0; i < tris_.size(); ++i) {  // robust fallback
      if (!alive_[i]) continue;
      bool in = true;
      for (int j = 0; j < 3 && in; ++j) {
        const Vec2 a = pts_[tris_[i][j]], b = pts_[tris_[i][(j + 1) % 3]];
        if (cross2(b - a, p - a) < -1e-10 * ((b - a).squaredNorm() + 1)) in = false;
      }
      if (in) return static_cast<int>(i);
    }
    throw std::runtime_error("Delaunay point location failed");
  }

  int insert(int pi, int hint) {
    const Vec2& p = pts_[pi];
    const int t0 = locate(p, hint);
    // cavity: BFS over neighbors whose circumcircle contains p
    std::vector<int> cavity{t0}, stack{t0};
    std::vector<char> in_cavity(tris_.size(), 0);
    in_cavity[t0] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int j = 0; j < 3; ++j) {
        const int nb = adj_[t][j];
        if (nb < 0 || in_cavity[nb] || !alive_[nb]) continue;
        if (incircle(nb, p)) {
          in_cavity[nb] = 1;
          cavity.push_back(nb);
          stack.push_back(nb);
        }
      }
    }
    // boundary of the cavity: directed edges with the outside neighbor
    struct Rim {
      int u, v, outside;
    };
    std::vector<Rim> rim;
    for (int t : cavity)
      for (int j = 0; j < 3; ++j) {
        const int nb = adj_[t][j];
        if (nb >= 0 && in_cavity[nb]) continue;
        rim.push_back({tris_[t][j], tris_[t][(j + 1) % 3], nb});
      }
    for (int t : cavity) alive_[t] = 0;
    // fan from p: new triangle (u, v, p) per rim edge; edge 0 faces outside
    const size_t first_new = tris_.size();
    for (const auto& e : rim) {
      const int t = static_cast<int>(tris_.size());
      tris_.push_back({e.u, e.v, pi});
      adj_.push_back({e.outside, -1, -1});
      alive_.push_back(1);
      if (e.outside >= 0) {
        for (int j = 0; j < 3; ++j) {
          const int a = tris_[e.outside][j], b = tris_[e.outside][(j + 1) % 3];
          if ((a == e.v && b == e.u) || (a == e.u && b == e.v)) adj_[e.outside][j] = t;
        }
      }
    }
    // pair the spoke edges (v,p)/(p,u) among the fan triangles
    std::unordered_map<long long, std::pair<int, int>> spoke;  // undirected key
    for (size_t t = first_new; t < tris_.size(); ++t) {
      for (int j = 1; j < 3; ++j) {
        int a = tris_[t][j], b = tris_[t][(j + 1) % 3];
        if (a > b) std::swap(a, b);
        const long long k = (static_cast<long long>(a) << 32) | b;
        auto it = spoke.find(k);
        if (it == spoke.end())
          spoke[k] = {static_cast<int>(t), j};
        else {
          adj_[t][j] = it->second.first;
          adj_[it->second.first][it->second.second] = static_cast<int>(t);
        }
      }
    }
    return static_cast<int>(tris_.size()) - 1;
  }

  std::vector<Vec2> pts_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<std::array<int, 3>> adj_;
  std::vector<char> alive_;
};

// --- Lawson-style min-angle-improving flips on interior edges ---
int flip_pass(TriMesh& m) {
  EdgeMap em = build_edge_map(m);
  std::unordered_map<EdgeKey, int> is_bedge;
  for (int i = 0; i < static_cast<int>(m.bedges.size()); ++i)
    is_bedge[ekey(m.bedges[i].a, m.bedges[i].b)] = i;

  int flips = 0;
  std::vector<EdgeKey> keys;
  keys.reserve(em.size());
  for (auto& kv : em) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());

  for (EdgeKey k : keys) {
    auto it = em.find(k);
    if (it == em.end() || it->second.count() != 2) continue;
    if (is_bedge.count(k)) continue;
    const int t1 = it->second.t[0], t2 = it->second.t[1];
    const int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xffffffffu);
    // opposite vertices
    int c = -1, d = -1;
    for (int j = 0; j < 3; ++j) {
      if (m.tris[t1][j] != a && m.tris[t1][j] != b) c = m.tris[t1][j];
      if (m.tris[t2][j] != a && m.tris[t2][j] != b) d = m.tris[t2][j];
    }
    if (c < 0 || d < 0 || c == d) continue;
    const Vec2 &pa = m.nodes[a], &pb = m.nodes[b], &pc = m.nodes[c], &pd = m.nodes[d];
    // proposed pair after flipping (a,b) -> (c,d)
    const double s1 = signed_area(pc, pa, pd);
    const double s2 = signed_area(pd, pb, pc);
    const double area_eps = 1e-14 * ((pa - pb).squaredNorm() + (pc - pd).squaredNorm());
    if (s1 <= area_eps || s2 <= area_eps) continue;  // quad not strictly convex
    const double old_min =
        std::min(tri_min_angle(m.nodes[m.tris[t1][0]], m.nodes[m.tris[t1][1]], m.nodes[m.tris[t1][2]]),
                 tri_min_angle(m.nodes[m.tris[t2][0]], m.nodes[m.tris[t2][1]], m.nodes[m.tris[t2][2]]));
    const double new_min = std::min(tri_min_angle(pc, pa, pd), tri_min_angle(pd, pb, pc));
    if (new_min <= old_min * (1.0 + 1e-12)) continue;

    detach_tri(em, m, t1);
    detach_tri(em, m, t2);
    m.tris[t1] = {c, a, d};
    m.tris[t2] = {d, b, c};
    attach_tri(em, m, t1);
    attach_tri(em, m, t2);
    ++flips;
  }
  return flips;
}

void run_flips(TriMesh& m, int max_passes = 40) {
  for (int p = 0; p < max_passes; ++p)
    if (flip_pass(m) == 0) break;
}

// --- edge split shared by uniform refinement and Rivara bisection ---
struct Splitter {
  TriMesh& m;
  EdgeMap em;
  std::unordered_map<EdgeKey, int> bedge_of;
  long long node_cap;

  explicit Splitter(TriMesh& mesh, long long cap) : m(mesh), node_cap(cap) {
    em = build_edge_map(m);
    for (int i = 0; i < static_cast<int>(m.bedges.size()); ++i)
      bedge_of[ekey(m.bedges[i].a, m.bedges[i].b)] = i;
  }

  int midpoint(int a, int b) {
    if (static_cast<long long>(m.nodes.size()) + 1 > node_cap)
      throw BudgetExceeded("mesh node cap exceeded");
    const EdgeKey k = ekey(a, b);
    Vec2 mid = 0.5 * (m.nodes[a] + m.nodes[b]);
    double sm = 0;
    auto bit = bedge_of.find(k);
    if (bit != bedge_of.end()) {
      const BoundaryEdge& be = m.bedges[bit->second];
      if (be.curve >= 0) {
        sm = 0.5 * (be.s0 + be.s1);
        mid = m.curves[be.curve]->point(sm);
      }
    }
    m.nodes.push_back(mid);
    const int idx = static_cast<int>(m.nodes.size()) - 1;
    if (bit != bedge_of.end()) {
      // replace the boundary edge by its two halves
      const int slot = bit->second;
      BoundaryEdge be = m.bedges[slot];
      const double smid = be.curve >= 0 ? 0.5 * (be.s0 + be.s1) : 0.0;
      BoundaryEdge first = be, second = be;
      first.b = idx;
      first.s1 = smid;
      second.a = idx;
      second.s0 = smid;
      m.bedges[slot] = first;
      m.bedges.push_back(second);
      bedge_of.erase(bit);
      bedge_of[ekey(first.a, first.b)] = slot;
      bedge_of[ekey(second.a, second.b)] = static_cast<int>(m.bedges.size()) - 1;
    }
    return idx;
  }

  // Splits edge (a,b) of triangle t (and of the neighbor, if any).
  void split_edge(int t, int a, int b) {
    const EdgeKey k = ekey(a, b);
    auto it = em.find(k);
    const int nb = (it != em.end() && it->second.count() == 2) ? it->second.other(t) : -1;
    const int mi = midpoint(a, b);
    split_one(t, a, b, mi);
    if (nb >= 0) split_one(nb, a, b, mi);
  }

  void split_one(int t, int a, int b, int mi) {
    int c = -1;
    for (int j = 0; j < 3; ++j)
      if (m.tris[t][j] != a && m.tris[t][j] != b) c = m.tris[t][j];
    // preserve orientation: child triangles inherit the parent's ordering
    std::array<int, 3> tri = m.tris[t];
    int ia = -1;
    for (int j = 0; j < 3; ++j)
      if (tri[j] == a && tri[(j + 1) % 3] == b) ia = j;
    detach_tri(em, m, t);
    if (ia >= 0) {
      m.tris[t] = {a, mi, c};
      m.tris.push_back({mi, b, c});
    } else {
      // edge appears as (b,a) in this triangle
      m.tris[t] = {b, mi, c};
      m.tris.push_back({mi, a, c});
    }
    attach_tri(em, m, t);
    const int t2 = static_cast<int>(m.tris.size()) - 1;
    attach_tri(em, m, t2);
  }

  void lepp_split_once(int t0) {
    int t = t0;
    for (int step = 0; step < 100000; ++step) {
      const int j = longest_edge_of(m, t);
      const int a = m.tris[t][j], b = m.tris[t][(j + 1) % 3];
      auto it = em.find(ekey(a, b));
      const int nb = (it != em.end() && it->second.count() == 2) ? it->second.other(t) : -1;
      if (nb >= 0) {
        const int jn = longest_edge_of(m, nb);
        const EdgeKey kn = ekey(m.tris[nb][jn], m.tris[nb][(jn + 1) % 3]);
        if (kn != ekey(a, b)) {
          t = nb;
          continue;
        }
      }
      split_edge(t, a, b);
      return;
    }
    throw std::runtime_error("longest-edge propagation did not terminate");
  }
};

}  // namespace

double TriMesh::tri_area(int t) const {
  return signed_area(nodes[tris[t][0]], nodes[tris[t][1]], nodes[tris[t][2]]);
}

double TriMesh::min_angle_deg() const {
  double mn = std::numbers::pi;
  for (const auto& t : tris)
    mn = std::min(mn, tri_min_angle(nodes[t[0]], nodes[t[1]], nodes[t[2]]));
  return mn * 180.0 / std::numbers::pi;
}

double TriMesh::total_area() const {
  double a = 0;
  for (int t = 0; t < static_cast<int>(tris.size()); ++t) a += tri_area(t);
  return a;
}

double TriMesh::boundary_length(BoundaryTag tag) const {
  double len = 0;
  for (const auto& be : bedges)
    if (be.tag == tag) len += (nodes[be.a] - nodes[be.b]).norm();
  return len;
}

std::vector<char> TriMesh::node_boundary_flags() const {
  std::vector<char> f(nodes.size(), 0);
  for (const auto& be : bedges) {
    for (int n : {be.a, be.b}) {
      const char t = static_cast<char>(be.tag);
      if (f[n] == 0 || t == 2) f[n] = t;  // Dirichlet wins at junctions
    }
  }
  return f;
}

void TriMesh::validate() const {
  for (int t = 0; t < static_cast<int>(tris.size()); ++t)
    if (tri_area(t) <= 0) throw std::runtime_error("mesh has a non-positive triangle");
  std::unordered_map<EdgeKey, int> edge_count;
  for (const auto& t : tris)
    for (int j = 0; j < 3; ++j) edge_count[ekey(t[j], t[(j + 1) % 3])]++;
  std::unordered_map<EdgeKey, int> bedge_set;
  for (const auto& be : bedges) bedge_set[ekey(be.a, be.b)]++;
  for (const auto& [k, c] : edge_count) {
    if (c > 2) throw std::runtime_error("mesh edge shared by more than two triangles");
    if (c == 1 && !bedge_set.count(k))
      throw std::runtime_error("boundary edge missing a tag");
  }
  for (const auto& [k, c] : bedge_set) {
    if (c != 1) throw std::runtime_error("duplicate boundary edge");
    auto it = edge_count.find(k);
    if (it == edge_count.end() || it->second != 1)
      throw std::runtime_error("tagged edge is not a boundary edge");
  }
  // boundary loops: every boundary node has exactly two incident bedges
  std::unordered_map<int, int> deg;
  for (const auto& be : bedges) {
    deg[be.a]++;
    deg[be.b]++;
  }
  for (const auto& [n, d] : deg)
    if (d != 2) throw std::runtime_error("boundary edges do not form closed loops");
}

TriMesh refine_uniform(const TriMesh& in, long long node_cap) {
  TriMesh m;
  m.nodes = in.nodes;
  m.curves = in.curves;
  if (4 * in.n_nodes() > node_cap) throw BudgetExceeded("mesh node cap exceeded");

  std::unordered_map<EdgeKey, int> bedge_of;
  for (int i = 0; i < static_cast<int>(in.bedges.size()); ++i)
    bedge_of[ekey(in.bedges[i].a, in.bedges[i].b)] = i;

  std::unordered_map<EdgeKey, int> mid;
  auto midpoint = [&](int a, int b) {
    const EdgeKey k = ekey(a, b);
    auto it = mid.find(k);
    if (it != mid.end()) return it->second;
    Vec2 p = 0.5 * (in.nodes[a] + in.nodes[b]);
    auto bit = bedge_of.find(k);
    if (bit != bedge_of.end()) {
      const BoundaryEdge& be = in.bedges[bit->second];
      if (be.curve >= 0) p = in.curves[be.curve]->point(0.5 * (be.s0 + be.s1));
    }
    m.nodes.push_back(p);
    const int idx = static_cast<int>(m.nodes.size()) - 1;
    mid[k] = idx;
    return idx;
  };

  for (const auto& t : in.tris) {
    const int m01 = midpoint(t[0], t[1]);
    const int m12 = midpoint(t[1], t[2]);
    const int m20 = midpoint(t[2], t[0]);
    m.tris.push_back({t[0], m01, m20});
    m.tris.push_back({m01, t[1], m12});
    m.tris.push_back({m20, m12, t[2]});
    m.tris.push_back({m01, m12, m20});
  }
  for (const auto& be : in.bedges) {
    const int mi = midpoint(be.a, be.b);
    const double sm = be.curve >= 0 ? 0.5 * (be.s0 + be.s1) : 0.0;
    m.bedges.push_back({be.a, mi, be.tag, be.curve, be.s0, sm});
    m.bedges.push_back({mi, be.b, be.tag, be.curve, sm, be.s1});
  }
  return m;
}

void refine_where(TriMesh& m, const std::function<bool(const TriMesh&, int)>& want_split,
                  long long node_cap) {
  for (int pass = 0; pass < 200; ++pass) {
    std::vector<int> marked;
    for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
      if (want_split(m, t)) marked.push_back(t);
    if (marked.empty()) return;
    Splitter sp(m, node_cap);
    for (int t : marked)
      if (want_split(m, t)) sp.lepp_split_once(t);
  }
  throw std::runtime_error("refine_where did not converge");
}

void refine_boundary_layer(TriMesh& m, double band, double h_band, long long node_cap,
                           double grade_slope) {
  // grid-bucketed point-to-boundary distance, rebuilt as the boundary refines
  struct SegIndex {
    double cell = 1.0;
    Vec2 lo;
    int nx = 1, ny = 1;
    std::vector<std::vector<int>> buckets;
    std::vector<std::array<Vec2, 2>> segs;

    void build(const TriMesh& mm, double cell_size) {
      segs.clear();
      for (const auto& be : mm.bedges) segs.push_back({mm.nodes[be.a], mm.nodes[be.b]});
      Vec2 mn = segs.empty() ? Vec2(0, 0) : segs[0][0], mx = mn;
      for (const auto& s : segs)
        for (const auto& p : s) {
          mn = mn.cwiseMin(p);
          mx = mx.cwiseMax(p);
        }
      cell = cell_size;
      lo = mn - Vec2(cell, cell);
      nx = std::max(1, static_cast<int>((mx.x() - lo.x()) / cell) + 2);
      ny = std::max(1, static_cast<int>((mx.y() - lo.y()) / cell) + 2);
      buckets.assign(static_cast<size_t>(nx) * ny, {});
      for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        Vec2 a = segs[i][0], b = segs[i][1];
        const int x0 = std::clamp(static_cast<int>((std::min(a.x(), b.x()) - lo.x()) / cell) - 1, 0, nx - 1);
        const int x1 = std::clamp(static_cast<int>((std::max(a.x(), b.x()) - lo.x()) / cell) + 1, 0, nx - 1);
        const int y0 = std::clamp(static_cast<int>((std::min(a.y(), b.y()) - lo.y()) / cell) - 1, 0, ny - 1);
        const int y1 = std::clamp(static_cast<int>((std::max(a.y(), b.y()) - lo.y()) / cell) + 1, 0, ny - 1);
        for (int x = x0; x <= x1; ++x)
          for (int y = y0; y <= y1; ++y) buckets[static_cast<size_t>(y) * nx + x].push_back(i);
      }
    }

    double dist(const Vec2& p, double cutoff) const {
      const int cx = std::clamp(static_cast<int>((p.x() - lo.x()) / cell), 0, nx - 1);
      const int cy = std::clamp(static_cast<int>((p.y() - lo.y()) / cell), 0, ny - 1);
      const int r = std::max(1, static_cast<int>(cutoff / cell) + 1);
      double best = std::numeric_limits<double>::infinity();
      for (int x = std::max(0, cx - r); x <= std::min(nx - 1, cx + r); ++x)
        for (int y = std::max(0, cy - r); y <= std::min(ny - 1, cy + r); ++y)
          for (int i : buckets[static_cast<size_t>(y) * nx + x]) {
            const Vec2 a = segs[i][0], d = segs[i][1] - segs[i][0];
            const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
            best = std::min(best, (p - (a + t * d)).norm());
          }
      return best;
    }
  };

  for (int round = 0; round < 40; ++round) {
    SegIndex idx;
    idx.build(m, std::max(band, h_band));
    auto pred = [&](const TriMesh& mm, int t) {
      const double diam = tri_diam(mm, t);
      if (diam <= h_band) return false;
      double d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 3; ++j) d = std::min(d, idx.dist(mm.nodes[mm.tris[t][j]], band * 1.5));
      if (d > band) return false;
      return diam > std::max(h_band, grade_slope * d);
    };
    std::vector<int> marked;
    for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
      if (pred(m, t)) marked.push_back(t);
    if (marked.empty()) return;
    Splitter sp(m, node_cap);
    for (int t : marked)
      if (pred(m, t)) sp.lepp_split_once(t);
  }
  throw std::runtime_error("boundary-layer refinement did not converge");
}

namespace {

// Boundary chain of the polygon with per-edge arc provenance.
struct Chain {
  std::vector<Vec2> pts;
  std::vector<BoundaryEdge> edges;  // closed loop over pts
};

Chain boundary_chain(const geom::CurvilinearPolygon& poly, double target_h,
                     std::vector<std::shared_ptr<const geom::Arc>>& curves) {
  Chain ch;
  const auto& arcs = poly.arcs();
  std::vector<int> arc_first(arcs.size(), 0);
  for (size_t k = 0; k < arcs.size(); ++k) {
    const auto& a = arcs[k];
    int n = std::max(1, static_cast<int>(std::ceil(a->length() / target_h)));
    if (!a->is_straight()) n = std::max(n, 8);
    arc_first[k] = static_cast<int>(ch.pts.size());
    for (int j = 0; j < n; ++j) ch.pts.push_back(a->point(a->length() * j / n));
    const int curve_id = a->is_straight() ? -1 : static_cast<int>(curves.size());
    if (curve_id >= 0) curves.push_back(a);
    for (int j = 0; j < n; ++j) {
      BoundaryEdge be;
      be.a = arc_first[k] + j;
      be.b = (j + 1 < n) ? arc_first[k] + j + 1 : -1;  // filled below
      be.tag = BoundaryTag::Robin;
      be.curve = curve_id;
      be.s0 = a->length() * j / n;
      be.s1 = a->length() * (j + 1) / n;
      ch.edges.push_back(be);
    }
  }
  // close the loop: the last edge of each arc ends at the next arc's first node
  for (size_t k = 0; k < arcs.size(); ++k) {
    const int first = arc_first[k];
    const int last = (k + 1 < arcs.size()) ? arc_first[k + 1] : static_cast<int>(ch.pts.size());
    const int n = last - first;
    for (int j = 0; j < n; ++j) {
      ch.edges[first + j].a = first + j;
      ch.edges[first + j].b = (j + 1 < n) ? first + j + 1 : arc_first[(k + 1) % arcs.size()];
    }
  }
  return ch;
}

// Thin triangles with all boundary nodes on one arc cannot be fixed by flips
// alone (cocircular fans); bisecting them creates interior points that can.
void improve_quality(TriMesh& m, double diam_floor, long long node_cap) {
  const double threshold = 18.0 * std::numbers::pi / 180.0;
  for (int round = 0; round < 30; ++round) {
    const auto bad = [&](const TriMesh& mm, int t) {
      return tri_min_angle(mm.nodes[mm.tris[t][0]], mm.nodes[mm.tris[t][1]],
                           mm.nodes[mm.tris[t][2]]) < threshold &&
             tri_diam(mm, t) > diam_floor;
    };
    std::vector<int> marked;
    for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
      if (bad(m, t)) marked.push_back(t);
    if (marked.empty()) return;
    Splitter sp(m, node_cap);
    for (int t : marked)
      if (bad(m, t)) sp.lepp_split_once(t);
    run_flips(m, 6);
  }
}

double size_target_near_corners(const TriMesh& m, int t,
                                const std::vector<Vec2>& corners,
                                const GradingPolicy& policy, double corner_radius) {
  double s = policy.target_h;
  for (const auto& v : corners) {
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) d = std::min(d, (m.nodes[m.tris[t][j]] - v).norm());
    double rr = corner_radius;
    double sz = policy.target_h;
    for (int k = 1; k <= policy.levels; ++k) {
      if (d <= rr) sz = policy.target_h * std::pow(policy.ratio, k);
      rr *= policy.ratio;
    }
    s = std::min(s, sz);
  }
  return s;
}

}  // namespace

namespace {

bool point_in_chain(const std::vector<Vec2>& chain, const Vec2& p) {
  bool in = false;  // even-odd crossing rule
  const size_t n = chain.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 &a = chain[j], &b = chain[i];
    if ((b.y() > p.y()) != (a.y() > p.y())) {
      const double x = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

double dist_to_chain(const std::vector<Vec2>& chain, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  const size_t n = chain.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = chain[j], d = chain[i] - chain[j];
    const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (p - (a + t * d)).norm());
  }
  return best;
}

}  // namespace

TriMesh mesh_polygon(const geom::CurvilinearPolygon& poly, const GradingPolicy& policy) {
  if (policy.target_h <= 0) throw std::invalid_argument("mesh_polygon: target_h must be > 0");
  TriMesh m;
  Chain ch = boundary_chain(poly, policy.target_h, m.curves);
  m.bedges = ch.edges;
  const int n_chain = static_cast<int>(ch.pts.size());

  // interior points on a hex lattice, kept clear of the boundary
  std::vector<Vec2> points = ch.pts;
  {
    Vec2 lo = ch.pts[0], hi = lo;
    for (const auto& p : ch.pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double h = policy.target_h;
    const double dy = h * std::sqrt(3.0) / 2.0;
    int row = 0;
    for (double y = lo.y() + 0.5 * dy; y < hi.y(); y += dy, ++row) {
      const double x0 = lo.x() + (row % 2 ? 0.75 * h : 0.25 * h);
      for (double x = x0; x < hi.x(); x += h) {
        const Vec2 p(x, y);
        if (!point_in_chain(ch.pts, p)) continue;
        if (dist_to_chain(ch.pts, p) < 0.7 * h) continue;
        points.push_back(p);
      }
    }
  }
  if (static_cast<long long>(points.size()) > policy.node_cap)
    throw BudgetExceeded("mesh node cap exceeded");
  m.nodes = points;

  Delaunay dt(points);
  m.tris.clear();
  for (const auto& t : dt.result(static_cast<int>(points.size()))) {
    const Vec2 c = (points[t[0]] + points[t[1]] + points[t[2]]) / 3.0;
    if (!point_in_chain(ch.pts, c)) continue;
    m.tris.push_back(t);
  }
  for (auto& t : m.tris)
    if (signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) < 0) std::swap(t[1], t[2]);

  // every chain edge must be present (it is Delaunay when interior points
  // keep their distance; sharp corners could in principle break this)
  {
    std::unordered_map<EdgeKey, int> have;
    for (const auto& t : m.tris)
      for (int j = 0; j < 3; ++j) have[ekey(t[j], t[(j + 1) % 3])]++;
    for (const auto& be : m.bedges)
      if (!have.count(ekey(be.a, be.b)))
        throw std::runtime_error("boundary edge not recovered by the triangulation");
    (void)n_chain;
  }
  improve_quality(m, policy.target_h / 16, policy.node_cap);

  // corner grading
  if (policy.levels > 0) {
    std::vector<Vec2> corners;
    double min_rho = std::numeric_limits<double>::infinity();
    for (int i : poly.convex_vertex_indices()) {
      corners.push_back(poly.vertices()[i].position);
      min_rho = std::min(min_rho, poly.vertices()[i].rho);
    }
    if (!corners.empty()) {
      const double corner_radius =
          policy.corner_radius > 0 ? policy.corner_radius
                                   : (std::isfinite(min_rho) ? min_rho : policy.target_h * 4);
      refine_where(
          m,
          [&](const TriMesh& mm, int t) {
            return tri_diam(mm, t) >
                   size_target_near_corners(mm, t, corners, policy, corner_radius);
          },
          policy.node_cap);
      improve_quality(m, policy.target_h * std::pow(policy.ratio, policy.levels) / 8,
                      policy.node_cap);
    }
  }

  for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
    if (m.tri_area(t) < 1e-12)
      throw std::runtime_error("grading produced a triangle below the area floor");
  m.validate();
  return m;
}

TriMesh mesh_truncated_sector(const geom::SectorGeometry& sec, const GradingPolicy& policy) {
  const double alpha = sec.half_angle, R = sec.truncation_radius;
  if (!(alpha > 0 && alpha < std::numbers::pi))
    throw std::invalid_argument("sector half-angle must be in (0, pi)");
  if (R <= 0) throw std::invalid_argument("sector radius must be > 0");
  const double h_tip = policy.target_h;
  if (h_tip <= 0 || h_tip >= R) throw std::invalid_argument("sector tip spacing out of range");

  // radial breaks: uniform h_tip near the tip, then geometric growth
  std::vector<double> radii{0.0};
  double dr = h_tip;
  const double growth = 1.14;
  const double dr_max = std::max(R / 10.0, h_tip);
  while (radii.back() < R) {
    radii.push_back(radii.back() + dr);
    if (radii.back() > 12.0 * h_tip) dr = std::min(dr * growth, dr_max);
  }
  const double scale = R / radii.back();
  for (double& r : radii) r *= scale;
  const int n_rings = static_cast<int>(radii.size()) - 1;

  // ring subdivision ladder: arc spacing tracks the local radial spacing
  const int n_min = std::max(1, static_cast<int>(std::ceil(2 * alpha / 0.9)));
  std::vector<int> nseg(n_rings + 1, n_min);
  for (int i = 1; i <= n_rings; ++i) {
    const double dr_i = radii[i] - radii[i - 1];
    const double ideal = 2 * alpha * radii[i] / dr_i;
    int n = nseg[i - 1];
    while (n * 1.4 < ideal) n *= 2;
    nseg[i] = n;
  }

  TriMesh m;
  std::vector<std::vector<int>> ring_nodes(n_rings + 1);
  m.nodes.emplace_back(0.0, 0.0);
  ring_nodes[0] = {0};
  for (int i = 1; i <= n_rings; ++i) {
    const long long add = nseg[i] + 1;
    if (m.n_nodes() + add > policy.node_cap) throw BudgetExceeded("mesh node cap exceeded");
    for (int j = 0; j <= nseg[i]; ++j) {
      const double th = -alpha + 2 * alpha * j / nseg[i];
      m.nodes.emplace_back(radii[i] * std::cos(th), radii[i] * std::sin(th));
      ring_nodes[i].push_back(static_cast<int>(m.nodes.size()) - 1);
    }
  }

  // tip fan
  for (int j = 0; j < nseg[1]; ++j)
    m.tris.push_back({0, ring_nodes[1][j], ring_nodes[1][j + 1]});
  // strips
  for (int i = 1; i < n_rings; ++i) {
    const auto& in = ring_nodes[i];
    const auto& out = ring_nodes[i + 1];
    if (nseg[i + 1] == nseg[i]) {
      for (int j = 0; j < nseg[i]; ++j) {
        m.tris.push_back({in[j], out[j], out[j + 1]});
        m.tris.push_back({in[j], out[j + 1], in[j + 1]});
      }
    } else if (nseg[i + 1] == 2 * nseg[i]) {
      for (int j = 0; j < nseg[i]; ++j) {
        m.tris.push_back({in[j], out[2 * j], out[2 * j + 1]});
        m.tris.push_back({in[j], out[2 * j + 1], in[j + 1]});
        m.tris.push_back({in[j + 1], out[2 * j + 1], out[2 * j + 2]});
      }
    } else {
      throw std::runtime_error("sector ring ladder must double at most once per strip");
    }
  }

  // boundary: rays Robin, outer arc Dirichlet (snappable circle)
  for (int i = 0; i < n_rings; ++i) {
    m.bedges.push_back({ring_nodes[i].front(), ring_nodes[i + 1].front(),
                        BoundaryTag::Robin, -1, 0, 0});
    m.bedges.push_back({ring_nodes[i + 1].back(), ring_nodes[i].back(),
                        BoundaryTag::Robin, -1, 0, 0});
  }
  const auto arc = geom::make_circular_arc(Vec2(0, 0), R, -alpha, alpha);
  m.curves.push_back(arc);
  const auto& outer = ring_nodes[n_rings];
  for (int j = 0; j < nseg[n_rings]; ++j) {
    BoundaryEdge be;
    be.a = outer[j];
    be.b = outer[j + 1];
    be.tag = BoundaryTag::Dirichlet;
    be.curve = 0;
    be.s0 = arc->length() * j / nseg[n_rings];
    be.s1 = arc->length() * (j + 1) / nseg[n_rings];
    m.bedges.push_back(be);
  }
  for (auto& t : m.tris)
    if (signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) < 0) std::swap(t[1], t[2]);
  m.validate();
  return m;
}

// ---------- Triangle format I/O ----------

void export_mesh(const TriMesh& m, const std::string& base) {
  const auto flags = m.node_boundary_flags();
  {
    std::ofstream f(base + ".node");
    if (!f) throw std::runtime_error("cannot write " + base + ".node");
    f << m.nodes.size() << " 2 0 1\n";
    char buf[128];
    for (size_t i = 0; i < m.nodes.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %d\n", i + 1, m.nodes[i].x(),
                    m.nodes[i].y(), static_cast<int>(flags[i]));
      f << buf;
    }
  }
  {
    std::ofstream f(base + ".ele");
    if (!f) throw std::runtime_error("cannot write " + base + ".ele");
    f << m.tris.size() << " 3 0\n";
    for (size_t t = 0; t < m.tris.size(); ++t)
      f << (t + 1) << ' ' << m.tris[t][0] + 1 << ' ' << m.tris[t][1] + 1 << ' '
        << m.tris[t][2] + 1 << '\n';
  }
  {
    std::ofstream f(base + ".poly");
    if (!f) throw std::runtime_error("cannot write " + base + ".poly");
    f << "0 2 0 1\n";
    f << m.bedges.size() << " 1\n";
    for (size_t i = 0; i < m.bedges.size(); ++i)
      f << (i + 1) << ' ' << m.bedges[i].a + 1 << ' ' << m.bedges[i].b + 1 << ' '
        << static_cast<int>(m.bedges[i].tag) << '\n';
    f << "0\n";
  }
}

TriMesh import_mesh(const std::string& base) {
  TriMesh m;
  long long n_nodes = 0;
  {
    std::ifstream f(base + ".node");
    if (!f) throw std::invalid_argument("cannot open " + base + ".node");
    int dim, nattr, nmark;
    if (!(f >> n_nodes >> dim >> nattr >> nmark) || dim != 2)
      throw std::invalid_argument("malformed .node header");
    m.nodes.resize(n_nodes);
    for (long long i = 0; i < n_nodes; ++i) {
      long long idx;
      double x, y;
      if (!(f >> idx >> x >> y)) throw std::invalid_argument("malformed .node row");
      for (int a = 0; a < nattr; ++a) {
        double tmp;
        f >> tmp;
      }
      int marker = 0;
      if (nmark) f >> marker;
      if (marker < 0 || marker > 2)
        throw std::invalid_argument("unknown boundary tag in .node");
      if (idx < 1 || idx > n_nodes) throw std::invalid_argument(".node index out of range");
      m.nodes[idx - 1] = Vec2(x, y);
    }
  }
  {
    std::ifstream f(base + ".ele");
    if (!f) throw std::invalid_argument("cannot open " + base + ".ele");
    long long n_tris;
    int per, nattr;
    if (!(f >> n_tris >> per >> nattr) || per != 3)
      throw std::invalid_argument("malformed .ele header");
    m.tris.resize(n_tris);
    for (long long t = 0; t < n_tris; ++t) {
      long long idx, a, b, c;
      if (!(f >> idx >> a >> b >> c)) throw std::invalid_argument("malformed .ele row");
      for (int x = 0; x < nattr; ++x) {
        double tmp;
        f >> tmp;
      }
      if (a < 1 || a > n_nodes || b < 1 || b > n_nodes || c < 1 || c > n_nodes)
        throw std::invalid_argument(".ele references a missing node");
      m.tris[idx - 1] = {static_cast<int>(a - 1), static_cast<int>(b - 1),
                         static_cast<int>(c - 1)};
    }
  }
  std::ifstream f(base + ".poly");
  if (f) {
    long long np;
    int dim, nattr, nmark;
    f >> np >> dim >> nattr >> nmark;
    for (long long i = 0; i < np; ++i) {
      long long idx;
      double x, y;
      f >> idx >> x >> y;
      for (int a = 0; a < nattr + nmark; ++a) {
        double tmp;
        f >> tmp;
      }
    }
    long long ns;
    int smark;
    if (!(f >> ns >> smark)) throw std::invalid_argument("malformed .poly segments header");
    for (long long i = 0; i < ns; ++i) {
      long long idx, a, b;
      int marker = 1;
      if (!(f >> idx >> a >> b)) throw std::invalid_argument("malformed .poly segment");
      if (smark) f >> marker;
      if (marker != 1 && marker != 2)
        throw std::invalid_argument("unknown boundary tag in .poly");
      if (a < 1 || a > n_nodes || b < 1 || b > n_nodes)
        throw std::invalid_argument(".poly references a missing node");
      m.bedges.push_back({static_cast<int>(a - 1), static_cast<int>(b - 1),
                          static_cast<BoundaryTag>(marker), -1, 0, 0});
    }
  } else {
    // derive boundary from the triangulation, tags from node markers
    std::unordered_map<EdgeKey, int> count;
    std::unordered_map<EdgeKey, std::pair<int, int>> oriented;
    for (const auto& t : m.tris)
      for (int j = 0; j < 3; ++j) {
        count[ekey(t[j], t[(j + 1) % 3])]++;
        oriented[ekey(t[j], t[(j + 1) % 3])] = {t[j], t[(j + 1) % 3]};
      }
    for (const auto& [k, c] : count)
      if (c == 1)
        m.bedges.push_back({oriented[k].first, oriented[k].second, BoundaryTag::Robin, -1, 0, 0});
  }
  m.validate();
  return m;
}

}  // namespace robin::mesh
