#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "robin/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

using namespace robin;
using geom::Vec2;
using mesh::BoundaryTag;

namespace {
constexpr double kPi = std::numbers::pi;

double smallest_corner_edge(const mesh::TriMesh& m, const Vec2& corner) {
  double best = 1e30;
  for (const auto& be : m.bedges) {
    const Vec2 a = m.nodes[be.a], b = m.nodes[be.b];
    if (std::min((a - corner).norm(), (b - corner).norm()) < 1e-9)
      best = std::min(best, (a - b).norm());
  }
  return best;
}
}  // namespace

TEST_CASE("uniform square mesh: size, angles, area") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.1;
  pol.levels = 0;
  const auto m = mesh_polygon(geom::make_square(), pol);
  m.validate();
  CHECK(m.n_tris() >= 150);
  CHECK(m.n_tris() <= 800);
  CHECK(m.min_angle_deg() >= 20.0);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.boundary_length(BoundaryTag::Robin) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(m.boundary_length(BoundaryTag::Dirichlet) == doctest::Approx(0.0));
  for (const auto& be : m.bedges)
    CHECK((m.nodes[be.a] - m.nodes[be.b]).norm() <= pol.target_h * (1 + 1e-12));
}

TEST_CASE("graded square mesh reaches target_h * ratio^levels at corners") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.1;
  pol.levels = 4;
  pol.ratio = 0.5;
  const auto m = mesh_polygon(geom::make_square(), pol);
  m.validate();
  const double want = 0.1 * std::pow(0.5, 4);
  for (const Vec2 corner : {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}) {
    const double e = smallest_corner_edge(m, corner);
    CHECK(e <= want * (1 + 1e-9));
    CHECK(e >= want * 0.2);  // not absurdly over-refined
  }
  CHECK(m.min_angle_deg() >= 15.0);
}

TEST_CASE("graded mesh edge lengths along a corner ray form a geometric sequence") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.1;
  pol.levels = 4;
  pol.ratio = 0.5;
  const auto m = mesh_polygon(geom::make_square(), pol);
  // walk boundary edges along y=0 from (0,0): annulus sizes should halve
  // toward the corner, ratio within 5% in the log-average sense
  std::vector<double> lens;
  double x = 0;
  while (x < 0.2) {
    double best = 1e30;
    int take = -1;
    for (int i = 0; i < static_cast<int>(m.bedges.size()); ++i) {
      const Vec2 a = m.nodes[m.bedges[i].a], b = m.nodes[m.bedges[i].b];
      if (std::abs(a.y()) < 1e-12 && std::abs(b.y()) < 1e-12) {
        const double lo = std::min(a.x(), b.x());
        if (std::abs(lo - x) < 1e-9 && (a - b).norm() < best) {
          best = (a - b).norm();
          take = i;
        }
      }
    }
    REQUIRE(take >= 0);
    lens.push_back(best);
    x += best;
  }
  REQUIRE(lens.size() >= 4);
  // sizes double (ratio 0.5 outward-to-inward) along the ray, up to plateaus:
  // successive distinct sizes must be within 5% of exact doubling
  std::vector<double> distinct;
  for (double v : lens)
    if (distinct.empty() || v > distinct.back() * 1.5) distinct.push_back(v);
  for (size_t i = 1; i < distinct.size(); ++i)
    CHECK(distinct[i] / distinct[i - 1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("disk polyline mesh keeps boundary nodes on the circle") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.12;
  const auto m = mesh_polygon(geom::make_disk(), pol);
  m.validate();
  const auto flags = m.node_boundary_flags();
  for (int i = 0; i < m.n_nodes(); ++i)
    if (flags[i]) CHECK(std::abs(m.nodes[i].norm() - 1.0) < 1e-12);
  CHECK(m.min_angle_deg() >= 15.0);
  CHECK(m.total_area() < kPi);
  CHECK(m.total_area() > kPi * 0.98);
}

TEST_CASE("refine_uniform splits 2-triangle square into 8 with 9 nodes") {
  mesh::TriMesh m;
  m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.tris = {{0, 1, 2}, {0, 2, 3}};
  m.bedges = {{0, 1, BoundaryTag::Robin, -1, 0, 0},
              {1, 2, BoundaryTag::Robin, -1, 0, 0},
              {2, 3, BoundaryTag::Robin, -1, 0, 0},
              {3, 0, BoundaryTag::Robin, -1, 0, 0}};
  const auto r = refine_uniform(m);
  r.validate();
  CHECK(r.n_tris() == 8);
  CHECK(r.n_nodes() == 9);
  CHECK(r.total_area() == doctest::Approx(1.0).epsilon(1e-14));
  const auto rr = refine_uniform(r);
  CHECK(rr.n_tris() == 32);  // x16 over two rounds
  CHECK(rr.total_area() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("refine_uniform snaps curved-boundary midpoints to the arc") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.3;
  auto m = mesh_polygon(geom::make_disk(), pol);
  const auto r = refine_uniform(m);
  const auto flags = r.node_boundary_flags();
  for (int i = 0; i < r.n_nodes(); ++i)
    if (flags[i]) CHECK(std::abs(r.nodes[i].norm() - 1.0) < 1e-12);
  CHECK(r.total_area() > m.total_area());  // inscribed polygon grows toward the disk
}

TEST_CASE("truncated sector mesh: tags, boundary lengths, quality") {
  geom::SectorGeometry sec{kPi / 4, 8.0};
  mesh::GradingPolicy pol;
  pol.target_h = 0.25;
  const auto m = mesh_truncated_sector(sec, pol);
  m.validate();
  CHECK(m.boundary_length(BoundaryTag::Robin) == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(m.boundary_length(BoundaryTag::Dirichlet) ==
        doctest::Approx(8.0 * kPi / 2).epsilon(2e-3));
  CHECK(m.min_angle_deg() >= 15.0);
  // graded toward the tip: innermost cells much smaller than outermost
  double tip_h = 1e30, far_h = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    double rmin = 1e30, diam = 0;
    for (int j = 0; j < 3; ++j) {
      rmin = std::min(rmin, m.nodes[m.tris[t][j]].norm());
      diam = std::max(diam, (m.nodes[m.tris[t][j]] - m.nodes[m.tris[t][(j + 1) % 3]]).norm());
    }
    if (rmin < 1e-9) tip_h = std::min(tip_h, diam);
    far_h = std::max(far_h, diam);
  }
  CHECK(tip_h <= pol.target_h * 1.5);
  CHECK(far_h >= 3 * tip_h);
}

TEST_CASE("thin sector mesh stays valid") {
  geom::SectorGeometry sec{kPi / 20, 3.3};
  mesh::GradingPolicy pol;
  pol.target_h = 0.1;
  const auto m = mesh_truncated_sector(sec, pol);
  m.validate();
  CHECK(m.min_angle_deg() >= 15.0);
  CHECK(m.boundary_length(BoundaryTag::Robin) == doctest::Approx(6.6).epsilon(1e-12));
}

TEST_CASE("quasi-uniform sector when growth is capped by radius") {
  geom::SectorGeometry sec{kPi / 3, 6.0};
  mesh::GradingPolicy pol;
  pol.target_h = 0.5;
  const auto m = mesh_truncated_sector(sec, pol);
  m.validate();
  CHECK(m.min_angle_deg() >= 15.0);
}

TEST_CASE("boundary-layer refinement refines only near the boundary") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.2;
  auto m = mesh_polygon(geom::make_square(), pol);
  const long long before = m.n_tris();
  mesh::refine_boundary_layer(m, 0.15, 0.03);
  m.validate();
  CHECK(m.n_tris() > before);
  double interior_min = 1e30;
  for (int t = 0; t < m.n_tris(); ++t) {
    Vec2 c = (m.nodes[m.tris[t][0]] + m.nodes[m.tris[t][1]] + m.nodes[m.tris[t][2]]) / 3.0;
    const double d = std::min({c.x(), c.y(), 1 - c.x(), 1 - c.y()});
    double diam = 0;
    for (int j = 0; j < 3; ++j)
      diam = std::max(diam, (m.nodes[m.tris[t][j]] - m.nodes[m.tris[t][(j + 1) % 3]]).norm());
    if (d <= 0.1) CHECK(diam <= 0.03 * (1 + 1e-9));
    if (d > 0.35) interior_min = std::min(interior_min, diam);
  }
  CHECK(interior_min > 0.06);  // far field untouched
}

TEST_CASE("node cap raises BudgetExceeded") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.01;
  pol.node_cap = 500;
  CHECK_THROWS_AS((void)mesh_polygon(geom::make_square(), pol), mesh::BudgetExceeded);
}

TEST_CASE("Triangle-format round trip is identity") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.3;
  const auto m = mesh_polygon(geom::make_square(), pol);
  const std::string base = std::filesystem::temp_directory_path() / "robin_mesh_rt";
  export_mesh(m, base);
  const auto r = mesh::import_mesh(base);
  REQUIRE(r.n_nodes() == m.n_nodes());
  REQUIRE(r.n_tris() == m.n_tris());
  for (int i = 0; i < m.n_nodes(); ++i) CHECK((r.nodes[i] - m.nodes[i]).norm() == 0.0);
  for (int t = 0; t < m.n_tris(); ++t)
    for (int j = 0; j < 3; ++j) CHECK(r.tris[t][j] == m.tris[t][j]);
  REQUIRE(r.bedges.size() == m.bedges.size());
  // re-export reproduces the files byte for byte
  const std::string base2 = base + "_2";
  mesh::export_mesh(r, base2);
  for (const char* ext : {".node", ".ele", ".poly"}) {
    std::ifstream f1(base + ext), f2(base2 + ext);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
  }
}

TEST_CASE("import: missing node reference and unknown marker are errors") {
  namespace fs = std::filesystem;
  const std::string base = fs::temp_directory_path() / "robin_mesh_bad";
  {
    std::ofstream node(base + ".node");
    node << "3 2 0 1\n1 0 0 1\n2 1 0 1\n3 0 1 1\n";
    std::ofstream ele(base + ".ele");
    ele << "1 3 0\n1 1 2 9\n";  // node 9 does not exist
  }
  CHECK_THROWS_WITH_AS((void)mesh::import_mesh(base), doctest::Contains("missing node"),
                       std::invalid_argument);
  {
    std::ofstream ele(base + ".ele");
    ele << "1 3 0\n1 1 2 3\n";
    std::ofstream poly(base + ".poly");
    poly << "0 2 0 1\n3 1\n1 1 2 1\n2 2 3 1\n3 3 1 3\n0\n";  // marker 3
  }
  CHECK_THROWS_WITH_AS((void)mesh::import_mesh(base), doctest::Contains("unknown boundary tag"),
                       std::invalid_argument);
}

TEST_CASE("L-shape and hexagon mesh cleanly") {
  mesh::GradingPolicy pol;
  pol.target_h = 0.15;
  pol.levels = 2;
  for (const auto& poly : {geom::make_lshape(), geom::make_regular_polygon(6)}) {
    const auto m = mesh_polygon(poly, pol);
    m.validate();
    CHECK(m.min_angle_deg() >= 15.0);
  }
}

TEST_CASE("bulged square (curved edges) meshes with snapped boundary") {
  const auto poly = geom::make_bulged_square(0.05);
  mesh::GradingPolicy pol;
  pol.target_h = 0.1;
  pol.levels = 2;
  const auto m = mesh_polygon(poly, pol);
  m.validate();
  CHECK(m.min_angle_deg() >= 15.0);
  // every Robin boundary node sits on one of the four arcs
  const auto flags = m.node_boundary_flags();
  for (int i = 0; i < m.n_nodes(); ++i) {
    if (!flags[i]) continue;
    double best = 1e30;
    for (const auto& arc : poly.arcs()) {
      const double L = arc->length();
      double s_best = 0;
      for (int j = 0; j <= 512; ++j) {
        const double s = L * j / 512;
        const double d = (arc->point(s) - m.nodes[i]).norm();
        if (d < best) {
          best = d;
          s_best = s;
        }
      }
      double lo = std::max(0.0, s_best - L / 512), hi = std::min(L, s_best + L / 512);
      for (int it = 0; it < 60; ++it) {
        const double s1 = lo + (hi - lo) / 3, s2 = hi - (hi - lo) / 3;
        if ((arc->point(s1) - m.nodes[i]).norm() < (arc->point(s2) - m.nodes[i]).norm())
          hi = s2;
        else
          lo = s1;
      }
      best = std::min(best, (arc->point(0.5 * (lo + hi)) - m.nodes[i]).norm());
    }
    CHECK(best < 1e-10);  // boundary nodes sit on the exact arcs
  }
}
