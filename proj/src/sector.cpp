#include "robin/sector.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace robin::sector {

namespace {

double radius_rule(double alpha, double eps, double tail) {
  const double e1 = -1.0 / (std::sin(alpha) * std::sin(alpha));
  return std::log(1.0 / tail) / ((1.0 - eps) * std::sqrt(-1.0 - e1));
}

double default_tip_h(double alpha) {
  return std::min(0.35, 0.8 * std::sin(alpha));
}

struct SolveOut {
  std::vector<double> kept;       // eigenvalues below cutoff
  std::vector<double> mesh_est;   // |E(refs) - E(refs-1)| per kept index
  mesh::TriMesh mesh;
  fem::SpectralPencil pencil;
  Eigen::MatrixXd vectors;        // kept columns only
};

SolveOut solve_truncated(double alpha, double R, double cutoff,
                         const SectorPolicy& policy) {
  geom::SectorGeometry sec{alpha, R};
  mesh::GradingPolicy mp;
  mp.target_h = policy.tip_h > 0 ? policy.tip_h : default_tip_h(alpha);
  mp.node_cap = policy.node_cap;
  mesh::TriMesh coarse = mesh_truncated_sector(sec, mp);
  for (int r = 0; r + 1 < policy.refinements; ++r)
    coarse = refine_uniform(coarse, policy.node_cap);
  mesh::TriMesh fine =
      policy.refinements > 0 ? refine_uniform(coarse, policy.node_cap) : coarse;

  const double e1_pred = -1.0 / (std::sin(alpha) * std::sin(alpha));
  eig::SolveOptions so;
  so.shift_hint = 1.25 * e1_pred;

  // the number of modes below the cutoff is known exactly from inertia
  const auto solve_on = [&](const mesh::TriMesh& m, fem::SpectralPencil* keep_pencil)
      -> std::pair<std::vector<double>, Eigen::MatrixXd> {
    fem::SpectralPencil p = fem::assemble(m, policy.order);
    const long long below = eig::count_below(p, 1.0, cutoff).count;
    std::vector<double> kept;
    Eigen::MatrixXd vecs(p.n_dofs, 0);
    if (below > 0) {
      eig::EigenResult res =
          eig::solve_lowest(p, 1.0, static_cast<int>(below), 1e-9, so);
      for (int i = 0; i < res.eigenvalues.size(); ++i)
        if (res.eigenvalues[i] < cutoff) kept.push_back(res.eigenvalues[i]);
      vecs = res.eigenvectors.leftCols(static_cast<int>(kept.size()));
    }
    if (keep_pencil) *keep_pencil = std::move(p);
    return {kept, vecs};
  };

  SolveOut out;
  const auto [kept_coarse, vc] = solve_on(coarse, nullptr);
  (void)vc;
  auto [kept_fine, vf] = solve_on(fine, &out.pencil);
  out.kept = kept_fine;
  out.vectors = vf;
  out.mesh = std::move(fine);
  out.mesh_est.resize(out.kept.size(), 0.0);
  for (size_t i = 0; i < out.kept.size(); ++i)
    out.mesh_est[i] = i < kept_coarse.size()
                          ? std::abs(out.kept[i] - kept_coarse[i])
                          : std::abs(out.kept[i] - cutoff);
  return out;
}

std::string cache_key(double alpha, double tol, const SectorPolicy& policy) {
  std::ostringstream os;
  os.precision(17);
  os << "a=" << alpha << ";tol=" << tol << ";h=" << policy.tip_h
     << ";refs=" << policy.refinements << ";ord=" << policy.order
     << ";eps=" << policy.eps << ";tail=" << policy.tail
     << ";R=" << policy.radius_override;
  return os.str();
}

}  // namespace

SectorEval::SectorEval(double alpha, mesh::TriMesh mesh, const fem::SpectralPencil& pencil,
                       Eigen::MatrixXd vectors)
    : alpha_(alpha), mesh_(std::move(mesh)), vectors_(std::move(vectors)),
      order_(pencil.order), dof_of_node_(pencil.dof_of_node),
      dof_of_edge_(pencil.dof_of_edge), edges_(pencil.edges) {
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) edge_slot_[edges_[e]] = e;
  for (const auto& p : mesh_.nodes) radius_ = std::max(radius_, p.norm());

  // uniform bucket grid over the mesh bounding box
  Vec2 lo = mesh_.nodes[0], hi = lo;
  for (const auto& p : mesh_.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double w = std::max(hi.x() - lo.x(), hi.y() - lo.y());
  cell_ = std::max(w / 512.0, 1e-9);
  x0_ = lo.x() - cell_;
  y0_ = lo.y() - cell_;
  nx_ = static_cast<int>((hi.x() - x0_) / cell_) + 2;
  ny_ = static_cast<int>((hi.y() - y0_) / cell_) + 2;
  buckets_.assign(static_cast<size_t>(nx_) * ny_, {});
  for (int t = 0; t < static_cast<int>(mesh_.tris.size()); ++t) {
    Vec2 tlo = mesh_.nodes[mesh_.tris[t][0]], thi = tlo;
    for (int j = 1; j < 3; ++j) {
      tlo = tlo.cwiseMin(mesh_.nodes[mesh_.tris[t][j]]);
      thi = thi.cwiseMax(mesh_.nodes[mesh_.tris[t][j]]);
    }
    const int cx0 = std::clamp(static_cast<int>((tlo.x() - x0_) / cell_), 0, nx_ - 1);
    const int cx1 = std::clamp(static_cast<int>((thi.x() - x0_) / cell_), 0, nx_ - 1);
    const int cy0 = std::clamp(static_cast<int>((tlo.y() - y0_) / cell_), 0, ny_ - 1);
    const int cy1 = std::clamp(static_cast<int>((thi.y() - y0_) / cell_), 0, ny_ - 1);
    for (int cx = cx0; cx <= cx1; ++cx)
      for (int cy = cy0; cy <= cy1; ++cy)
        buckets_[static_cast<size_t>(cy) * nx_ + cx].push_back(t);
  }
}

int SectorEval::locate(const Vec2& p, double bary[3]) const {
  const int cx = std::clamp(static_cast<int>((p.x() - x0_) / cell_), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>((p.y() - y0_) / cell_), 0, ny_ - 1);
  double best_score = -1e30;
  int best_t = -1;
  for (int ring = 0; ring <= 1; ++ring) {
    for (int dx = -ring; dx <= ring; ++dx)
      for (int dy = -ring; dy <= ring; ++dy) {
        if (ring == 1 && std::max(std::abs(dx), std::abs(dy)) != 1) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || x >= nx_ || y < 0 || y >= ny_) continue;
        for (int t : buckets_[static_cast<size_t>(y) * nx_ + x]) {
          const Vec2 a = mesh_.nodes[mesh_.tris[t][0]];
          const Vec2 b = mesh_.nodes[mesh_.tris[t][1]];
          const Vec2 c = mesh_.nodes[mesh_.tris[t][2]];
          const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
          const double l1 = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / det;
          const double l2 = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / det;
          const double l0 = 1.0 - l1 - l2;
          const double score = std::min({l0, l1, l2});
          if (score > best_score) {
            best_score = score;
            best_t = t;
            bary[0] = l0;
            bary[1] = l1;
            bary[2] = l2;
          }
        }
      }
    if (best_score >= -1e-10) break;
  }
  if (best_t < 0 || best_score < -1e-6) return -1;
  for (int j = 0; j < 3; ++j) bary[j] = std::clamp(bary[j], 0.0, 1.0);
  const double s = bary[0] + bary[1] + bary[2];
  for (int j = 0; j < 3; ++j) bary[j] /= s;
  return best_t;
}

double SectorEval::value(int n, const Vec2& u) const {
  if (n < 1 || n > modes()) throw std::invalid_argument("sector mode index out of range");
  const double r = u.norm();
  if (r >= radius_) return 0.0;
  Vec2 q = u;
  // clamp the angle onto the sector (rigid transplants of curved corners can
  // land slightly outside the wedge)
  const double th = std::atan2(u.y(), u.x());
  const double th_max = alpha_ * (1.0 - 1e-14);
  if (std::abs(th) > th_max) {
    const double tc = std::copysign(th_max, th);
    q = r * Vec2(std::cos(tc), std::sin(tc));
  }
  double bary[3];
  const int t = locate(q, bary);
  if (t < 0) return 0.0;
  const auto& tri = mesh_.tris[t];
  const Eigen::VectorXd& x = vectors_.col(n - 1);
  const auto nodal = [&](int node) {
    const int d = dof_of_node_[node];
    return d >= 0 ? x[d] : 0.0;
  };
  if (order_ == 1)
    return bary[0] * nodal(tri[0]) + bary[1] * nodal(tri[1]) + bary[2] * nodal(tri[2]);
  double val = 0;
  for (int j = 0; j < 3; ++j) val += bary[j] * (2 * bary[j] - 1) * nodal(tri[j]);
  for (int j = 0; j < 3; ++j) {
    int a = tri[j], b = tri[(j + 1) % 3];
    if (a > b) std::swap(a, b);
    const int slot = edge_slot_.at({a, b});
    const int d = dof_of_edge_[slot];
    if (d >= 0) val += 4 * bary[j] * bary[(j + 1) % 3] * x[d];
  }
  return val;
}

SectorSpectrum sector_spectrum(double alpha, double tol, const SectorPolicy& policy) {
  if (!(alpha > 0) || !(alpha < std::numbers::pi))
    throw std::invalid_argument("sector half-angle must be in (0, pi)");
  SectorSpectrum out;
  out.alpha = alpha;
  if (alpha >= std::numbers::pi / 2) {
    out.count = 0;  // empty discrete spectrum
    out.cutoff = -1;
    return out;
  }

  // disk cache (spectra only; eigenfunctions are rebuilt on demand)
  std::string cache_path;
  if (!policy.cache_dir.empty()) {
    std::filesystem::create_directories(policy.cache_dir);
    cache_path = policy.cache_dir + "/sector_" +
                 std::to_string(std::hash<std::string>{}(cache_key(alpha, tol, policy))) +
                 ".json";
  }

  out.truncation_radius = policy.radius_override > 0
                              ? policy.radius_override
                              : radius_rule(alpha, policy.eps, policy.tail);
  const double R = out.truncation_radius;

  // Essential-spectrum guard: the Dirichlet-truncated domain carries spurious
  // eigenvalues approaching -1 from above at the 1/radius^2 scale, so the
  // cutoff margin shrinks with the radius (never wider than 10*tol).
  const auto cutoff_at = [&](double radius) {
    return -1.0 + std::min(10.0 * tol, 1.0 / (radius * radius));
  };
  out.cutoff = cutoff_at(2 * R);

  SolveOut at_R = solve_truncated(alpha, R, cutoff_at(R), policy);
  SolveOut at_2R = solve_truncated(alpha, 2 * R, out.cutoff, policy);

  out.eigenvalues = at_2R.kept;
  out.mesh_error_estimate = at_2R.mesh_est;
  out.count = static_cast<int>(at_2R.kept.size());
  out.count_stable = at_R.kept.size() == at_2R.kept.size();
  if (!out.count_stable)
    out.warnings.push_back("count unstable under R-doubling: " +
                           std::to_string(at_R.kept.size()) + " at R vs " +
                           std::to_string(at_2R.kept.size()) + " at 2R");
  out.truncation_error_estimate.resize(out.eigenvalues.size(), 0.0);
  for (size_t i = 0; i < out.eigenvalues.size(); ++i)
    out.truncation_error_estimate[i] =
        i < at_R.kept.size() ? at_R.kept[i] - at_2R.kept[i]
                             : std::abs(out.cutoff - out.eigenvalues[i]);
  out.eval = std::make_shared<SectorEval>(alpha, std::move(at_2R.mesh), at_2R.pencil,
                                          std::move(at_2R.vectors));

  if (!cache_path.empty()) {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["R"] = R;
    j["eigenvalues"] = out.eigenvalues;
    j["truncation_error_estimate"] = out.truncation_error_estimate;
    j["mesh_error_estimate"] = out.mesh_error_estimate;
    j["count"] = out.count;
    j["count_stable"] = out.count_stable;
    j["cutoff"] = out.cutoff;
    j["key"] = cache_key(alpha, tol, policy);
    std::ofstream f(cache_path);
    f << j.dump(2) << '\n';
  }
  return out;
}

ScalingReport scaling_check(double alpha, double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("scaling_check: gamma must be > 0");
  geom::SectorGeometry sec{alpha, 6.0};
  mesh::GradingPolicy mp;
  mp.target_h = 0.4;
  mesh::TriMesh m = mesh_truncated_sector(sec, mp);

  mesh::TriMesh scaled = m;
  for (auto& p : scaled.nodes) p /= gamma;

  fem::SpectralPencil p1 = fem::assemble(m, 2);
  fem::SpectralPencil pg = fem::assemble(scaled, 2);
  const int n = std::min(4, p1.n_dofs);
  eig::EigenResult r1 = eig::solve_lowest(p1, 1.0, n, 1e-12);
  eig::EigenResult rg = eig::solve_lowest(pg, gamma, n, 1e-12);

  ScalingReport rep;
  rep.gamma = gamma;
  rep.n_compared = n;
  for (int i = 0; i < n; ++i) {
    const double want = gamma * gamma * r1.eigenvalues[i];
    const double got = rg.eigenvalues[i];
    rep.max_rel_error =
        std::max(rep.max_rel_error, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  rep.pass = rep.max_rel_error < 1e-12;
  return rep;
}

ModelSum build_model_sum(const geom::CurvilinearPolygon& poly, double tol,
                         const SectorPolicy& policy) {
  ModelSum ms;
  struct Entry {
    double e;
    int n;
    int vertex;
    double unc;
  };
  std::vector<Entry> all;
  double max_unc = 0.0;

  for (int vi : poly.convex_vertex_indices()) {
    const double alpha = poly.vertices()[vi].half_angle;
    const long long key = std::llround(alpha * 1e12);
    auto it = ms.by_alpha_key.find(key);
    if (it == ms.by_alpha_key.end()) {
      auto spec = std::make_shared<SectorSpectrum>(sector_spectrum(alpha, tol, policy));
      for (const auto& w : spec->warnings)
        ms.warnings.push_back("vertex " + std::to_string(vi) + ": " + w);
      it = ms.by_alpha_key.emplace(key, std::move(spec)).first;
    }
    ms.vertex_alpha_key[vi] = key;
    const SectorSpectrum& sp = *it->second;
    for (int n = 0; n < sp.count; ++n) {
      all.push_back({sp.eigenvalues[n], n + 1, vi, sp.uncertainty(n)});
      max_unc = std::max(max_unc, sp.uncertainty(n));
    }
  }

  ms.N_total = static_cast<int>(all.size());
  if (all.empty()) return ms;

  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.e < b.e; });
  ms.E_max = all.back().e;
  ms.cluster_tol = 10.0 * std::max(max_unc, 1e-14);

  ClusterEntry cur;
  double last_e = all.front().e;
  for (const auto& en : all) {
    const double gap = en.e - last_e;
    if (!cur.members.empty() && gap > ms.cluster_tol) {
      cur.lambda /= cur.multiplicity;
      ms.clusters.push_back(cur);
      cur = ClusterEntry{};
    } else if (!cur.members.empty() && gap > max_unc && gap <= ms.cluster_tol) {
      std::ostringstream os;
      os.precision(12);
      os << "ambiguous cluster split near E=" << en.e << ": gap " << gap
         << " lies between the uncertainty " << max_unc << " and 10x uncertainty "
         << ms.cluster_tol << " (merged clustering reported; the split variant "
         << "separates the pair)";
      ms.warnings.push_back(os.str());
    }
    cur.lambda += en.e;
    cur.multiplicity += 1;
    cur.members.emplace_back(en.n, en.vertex);
    last_e = en.e;
  }
  cur.lambda /= cur.multiplicity;
  ms.clusters.push_back(cur);
  return ms;
}

}  // namespace robin::sector
