#include "robin/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace robin::fem {

namespace {

// Dunavant 6-point rule, exact to degree 4, barycentric (weights sum to 1).
struct QP {
  double l0, l1, l2, w;
};
constexpr QP kTriRule[6] = {
    {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
    {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
};

// 3-point Gauss on [0,1], exact to degree 5.
constexpr double kGx[3] = {0.1127016653792583, 0.5, 0.8872983346207417};
constexpr double kGw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// P2 shape values in barycentric coordinates, local dof order:
// vertices 0..2, then midpoints of edges (0,1), (1,2), (2,0).
void p2_shapes(double l0, double l1, double l2, double N[6]) {
  N[0] = l0 * (2 * l0 - 1);
  N[1] = l1 * (2 * l1 - 1);
  N[2] = l2 * (2 * l2 - 1);
  N[3] = 4 * l0 * l1;
  N[4] = 4 * l1 * l2;
  N[5] = 4 * l2 * l0;
}

// Barycentric gradients of the P2 shapes: dN/dl as coefficients against
// grad(l0), grad(l1), grad(l2).
void p2_shape_grads(double l0, double l1, double l2, double dN[6][3]) {
  const double z[6][3] = {
      {4 * l0 - 1, 0, 0},
      {0, 4 * l1 - 1, 0},
      {0, 0, 4 * l2 - 1},
      {4 * l1, 4 * l0, 0},
      {0, 4 * l2, 4 * l1},
      {4 * l2, 0, 4 * l0},
  };
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) dN[i][j] = z[i][j];
}

}  // namespace

SpectralPencil assemble(const mesh::TriMesh& m, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("element order must be 1 or 2");
  if (m.tris.empty()) throw std::invalid_argument("cannot assemble on an empty mesh");
  for (int t = 0; t < static_cast<int>(m.tris.size()); ++t)
    if (m.tri_area(t) <= 0) throw std::invalid_argument("mesh has an inverted element");

  SpectralPencil p;
  p.order = order;
  const int nn = static_cast<int>(m.nodes.size());

  // global edge slots for P2 midpoints
  std::map<std::pair<int, int>, int> edge_slot;
  if (order == 2) {
    for (const auto& t : m.tris)
      for (int j = 0; j < 3; ++j) {
        int a = t[j], b = t[(j + 1) % 3];
        if (a > b) std::swap(a, b);
        if (!edge_slot.count({a, b})) {
          edge_slot[{a, b}] = static_cast<int>(p.edges.size());
          p.edges.emplace_back(a, b);
        }
      }
  }

  // Dirichlet constraints
  std::vector<char> node_fixed(nn, 0);
  std::vector<char> edge_fixed(p.edges.size(), 0);
  for (const auto& be : m.bedges) {
    if (be.tag != mesh::BoundaryTag::Dirichlet) continue;
    node_fixed[be.a] = node_fixed[be.b] = 1;
    if (order == 2) {
      int a = be.a, b = be.b;
      if (a > b) std::swap(a, b);
      auto it = edge_slot.find({a, b});
      if (it != edge_slot.end()) edge_fixed[it->second] = 1;
    }
  }

  p.dof_of_node.assign(nn, -1);
  int nd = 0;
  for (int i = 0; i < nn; ++i)
    if (!node_fixed[i]) {
      p.dof_of_node[i] = nd++;
      p.dof_points.push_back(m.nodes[i]);
    }
  if (order == 2) {
    p.dof_of_edge.assign(p.edges.size(), -1);
    for (size_t e = 0; e < p.edges.size(); ++e)
      if (!edge_fixed[e]) {
        p.dof_of_edge[e] = nd++;
        p.dof_points.push_back(0.5 * (m.nodes[p.edges[e].first] + m.nodes[p.edges[e].second]));
      }
  }
  p.n_dofs = nd;
  if (nd == 0) throw std::invalid_argument("all degrees of freedom eliminated");

  std::vector<Eigen::Triplet<double>> tk, tb, tm;
  tk.reserve(36 * m.tris.size());
  tm.reserve(36 * m.tris.size());

  const int nloc = order == 1 ? 3 : 6;
  std::vector<int> gdof(nloc);

  for (const auto& t : m.tris) {
    const Vec2 p0 = m.nodes[t[0]], p1 = m.nodes[t[1]], p2 = m.nodes[t[2]];
    const double det = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
    const double area = 0.5 * det;
    // gradients of barycentric coordinates
    const Vec2 gl0 = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / det;
    const Vec2 gl1 = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / det;
    const Vec2 gl2 = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / det;
    const Vec2 gl[3] = {gl0, gl1, gl2};

    for (int j = 0; j < 3; ++j) gdof[j] = p.dof_of_node[t[j]];
    if (order == 2) {
      for (int j = 0; j < 3; ++j) {
        int a = t[j], b = t[(j + 1) % 3];
        if (a > b) std::swap(a, b);
        gdof[3 + j] = p.dof_of_edge[edge_slot[{a, b}]];
      }
    }

    double ke[6][6] = {}, me[6][6] = {};
    if (order == 1) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          ke[i][j] = gl[i].dot(gl[j]) * area;
          me[i][j] = area / 12.0 * (i == j ? 2.0 : 1.0);
        }
    } else {
      for (const auto& q : kTriRule) {
        double N[6], dN[6][3];
        p2_shapes(q.l0, q.l1, q.l2, N);
        p2_shape_grads(q.l0, q.l1, q.l2, dN);
        Vec2 g[6];
        for (int i = 0; i < 6; ++i)
          g[i] = dN[i][0] * gl[0] + dN[i][1] * gl[1] + dN[i][2] * gl[2];
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j) {
            ke[i][j] += q.w * area * g[i].dot(g[j]);
            me[i][j] += q.w * area * N[i] * N[j];
          }
      }
    }
    for (int i = 0; i < nloc; ++i) {
      if (gdof[i] < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        if (gdof[j] < 0) continue;
        tk.emplace_back(gdof[i], gdof[j], ke[i][j]);
        tm.emplace_back(gdof[i], gdof[j], me[i][j]);
      }
    }
  }

  // Robin boundary mass
  for (const auto& be : m.bedges) {
    if (be.tag != mesh::BoundaryTag::Robin) continue;
    const double len = (m.nodes[be.a] - m.nodes[be.b]).norm();
    if (order == 1) {
      const int da = p.dof_of_node[be.a], db = p.dof_of_node[be.b];
      const double e00 = len / 3.0, e01 = len / 6.0;
      if (da >= 0) tb.emplace_back(da, da, e00);
      if (db >= 0) tb.emplace_back(db, db, e00);
      if (da >= 0 && db >= 0) {
        tb.emplace_back(da, db, e01);
        tb.emplace_back(db, da, e01);
      }
    } else {
      int a = be.a, b = be.b;
      int lo = a, hi = b;
      if (lo > hi) std::swap(lo, hi);
      const int dm = p.dof_of_edge[edge_slot[{lo, hi}]];
      const int dofs[3] = {p.dof_of_node[a], p.dof_of_node[b], dm};
      double eb[3][3] = {};
      for (int g = 0; g < 3; ++g) {
        const double u = kGx[g];
        // 1D quadratic trace: endpoints and midpoint
        const double Ns[3] = {(1 - u) * (1 - 2 * u), u * (2 * u - 1), 4 * u * (1 - u)};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) eb[i][j] += kGw[g] * len * Ns[i] * Ns[j];
      }
      for (int i = 0; i < 3; ++i) {
        if (dofs[i] < 0) continue;
        for (int j = 0; j < 3; ++j)
          if (dofs[j] >= 0) tb.emplace_back(dofs[i], dofs[j], eb[i][j]);
      }
    }
  }

  p.K.resize(nd, nd);
  p.B.resize(nd, nd);
  p.M.resize(nd, nd);
  p.K.setFromTriplets(tk.begin(), tk.end());
  p.B.setFromTriplets(tb.begin(), tb.end());
  p.M.setFromTriplets(tm.begin(), tm.end());
  p.K.makeCompressed();
  p.B.makeCompressed();
  p.M.makeCompressed();
  return p;
}

double rayleigh(const SpectralPencil& p, double gamma, const Eigen::VectorXd& x) {
  const double xmx = x.dot(p.M * x);
  if (!(xmx > 0)) throw std::invalid_argument("rayleigh: zero vector");
  return (x.dot(p.K * x) - gamma * x.dot(p.B * x)) / xmx;
}

void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "%%MatrixMarket matrix coordinate real symmetric\n";
  // lower triangle only
  std::vector<std::array<double, 3>> entries;
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      if (it.row() >= it.col())
        entries.push_back({static_cast<double>(it.row() + 1),
                           static_cast<double>(it.col() + 1), it.value()});
  f << A.rows() << ' ' << A.cols() << ' ' << entries.size() << '\n';
  char buf[96];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g\n", static_cast<int>(e[0]),
                  static_cast<int>(e[1]), e[2]);
    f << buf;
  }
}

}  // namespace robin::fem
