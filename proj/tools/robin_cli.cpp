// Batch driver: sector spectra, corner asymptotics with certificates, Weyl
// counting sweeps, 1D model tables, rate fits, and mesh utilities.

#include "CLI11.hpp"
#include "json.hpp"

#include "robin/eig.hpp"
#include "robin/geometry.hpp"
#include "robin/mesh.hpp"
#include "robin/model1d.hpp"
#include "robin/quasimode.hpp"
#include "robin/sector.hpp"
#include "robin/weyl.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace robin;

namespace {

constexpr const char* kSchema = "# robin-csv v1";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct CsvWriter {
  std::ofstream f;
  CsvWriter(const fs::path& path, const std::string& command_echo,
            const std::vector<std::string>& header) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    f.open(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << kSchema << "\n# config: " << command_echo << '\n';
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
    f << '\n';
  }
  void comment(const std::string& line) { f << "# " << line << '\n'; }
};

geom::CurvilinearPolygon load_poly(const std::string& path) {
  return geom::parse_polygon_file(path);
}

mesh::GradingPolicy corner_mesh_policy(double gamma, long long node_cap) {
  mesh::GradingPolicy mp;
  mp.target_h = std::min(0.05, 0.3 / gamma);
  mp.levels = std::max(1, static_cast<int>(std::ceil(std::log2(gamma * mp.target_h * 10))));
  mp.node_cap = node_cap;
  return mp;
}

int cluster_of(const sector::ModelSum& model, int rank) {
  int seen = 0;
  for (int c = 0; c < static_cast<int>(model.clusters.size()); ++c) {
    seen += model.clusters[c].multiplicity;
    if (rank < seen) return c;
  }
  return static_cast<int>(model.clusters.size()) - 1;
}

struct Fit {
  double slope = 0, intercept = 0, r2 = 0;
};

Fit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  Fit out;
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out.intercept = (sy - out.slope * sx) / n;
  const double ss_tot = syy - sy * sy / n;
  double ss_res = 0;
  for (int i = 0; i < n; ++i) {
    const double e = y[i] - (out.slope * x[i] + out.intercept);
    ss_res += e * e;
  }
  out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return out;
}

int run_sector(double alpha, double tol, const std::string& out_dir,
               const std::string& cache_dir, double radius_override, int refs,
               const std::string& echo) {
  sector::SectorPolicy pol;
  pol.cache_dir = cache_dir;
  pol.radius_override = radius_override;
  pol.refinements = refs;
  const auto sp = sector::sector_spectrum(alpha, tol, pol);

  const fs::path base = fs::path(out_dir) / ("sector_a" + num(alpha));
  {
    nlohmann::json j;
    j["alpha"] = sp.alpha;
    j["truncation_radius"] = sp.truncation_radius;
    j["cutoff"] = sp.cutoff;
    j["count"] = sp.count;
    j["count_stable"] = sp.count_stable;
    j["eigenvalues"] = sp.eigenvalues;
    j["truncation_error_estimate"] = sp.truncation_error_estimate;
    j["mesh_error_estimate"] = sp.mesh_error_estimate;
    j["warnings"] = sp.warnings;
    std::ofstream jf(base.string() + ".json");
    jf << j.dump(2) << '\n';
  }
  CsvWriter csv(base.string() + ".csv", echo,
                {"n", "eigenvalue", "truncation_error_estimate", "mesh_error_estimate"});
  for (int n = 0; n < sp.count; ++n)
    csv.row({std::to_string(n + 1), num(sp.eigenvalues[n]),
             num(sp.truncation_error_estimate[n]), num(sp.mesh_error_estimate[n])});
  for (const auto& w : sp.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "alpha " << num(alpha) << ": count " << sp.count << ", wrote " << base.string()
            << ".{csv,json}\n";
  return 0;
}

int run_corners(const std::string& poly_file, const std::vector<double>& gammas, double tol,
                double beta_exp, int sector_refs, long long node_cap,
                const std::string& out_dir, const std::string& cache_dir,
                const std::string& echo) {
  const auto poly = load_poly(poly_file);
  sector::SectorPolicy spol;
  spol.refinements = sector_refs;
  spol.cache_dir = cache_dir;
  const auto model = sector::build_model_sum(poly, tol, spol);
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';

  const fs::path base = fs::path(out_dir) / "corners";
  CsvWriter csv(base.string() + ".csv", echo,
                {"gamma", "n", "E_fem", "model", "deviation", "cert_lo", "cert_hi",
                 "verified_count"});
  if (poly.has_nonconvex_vertex())
    csv.comment("domain has nonconvex vertices: H1 corner singularities may slow "
                "convergence near them");
  if (model.N_total == 0) {
    csv.comment("model sum is empty (no convex vertices): corner asymptotics does not apply");
    std::cout << "N=0, skipping corner asymptotics\n";
    return 0;
  }

  nlohmann::json certs_json = nlohmann::json::array();
  for (double gamma : gammas) {
    const auto mp = corner_mesh_policy(gamma, node_cap);
    const auto m = mesh_polygon(poly, mp);
    const auto p = fem::assemble(m, 2);
    eig::SolveOptions so;
    so.shift_hint = 1.25 * gamma * gamma * model.clusters.front().lambda;
    const auto res = eig::solve_lowest(p, gamma, model.N_total, 1e-9, so);

    std::vector<quasimode::Certificate> certs;
    for (const auto& cl : model.clusters) {
      std::vector<quasimode::QuasiMode> qms;
      for (const auto& [nn, vi] : cl.members)
        qms.push_back(quasimode::build_quasimode(poly, p, model, vi, nn, gamma, beta_exp));
      certs.push_back(quasimode::certify(qms, p, gamma));
      nlohmann::json cj = nlohmann::json::parse(quasimode::certificate_json(certs.back()));
      cj["gamma"] = gamma;
      certs_json.push_back(cj);
    }
    for (int n = 0; n < model.N_total; ++n) {
      const int c = cluster_of(model, n);
      const double target = gamma * gamma * model.clusters[c].lambda;
      csv.row({num(gamma), std::to_string(n + 1), num(res.eigenvalues[n]), num(target),
               num(res.eigenvalues[n] - target), num(certs[c].lambda - certs[c].halfwidth),
               num(certs[c].lambda + certs[c].halfwidth),
               std::to_string(certs[c].verified_count)});
    }
  }
  std::ofstream jf(base.string() + "_certificates.json");
  jf << certs_json.dump(2) << '\n';
  std::cout << "wrote " << base.string() << ".csv and certificates\n";
  return 0;
}

int run_weyl(const std::string& poly_file, const std::string& regime, double param,
             const std::vector<double>& gammas, long long node_cap,
             const std::string& out_dir, const std::string& echo) {
  const auto poly = load_poly(poly_file);
  weyl::CountingPolicy pol;
  pol.node_cap = node_cap;
  const auto rep = regime == "bulk" ? weyl::weyl_bulk(poly, param, gammas, pol)
                                    : weyl::weyl_edge(poly, param, gammas, pol);
  const fs::path path = fs::path(out_dir) / ("weyl_" + regime + ".csv");
  CsvWriter csv(path, echo,
                {"regime", "gamma", "threshold", "count", "prediction", "deviation",
                 "mesh_nodes", "stabilized"});
  for (const auto& r : rep.rows)
    csv.row({rep.regime, num(r.gamma), num(r.threshold), std::to_string(r.count),
             num(r.prediction), num(r.deviation), std::to_string(r.mesh_nodes),
             r.stabilized ? "1" : "0"});
  csv.comment("fitted_exponent=" + num(rep.fitted_exponent));
  std::cout << "fitted exponent " << num(rep.fitted_exponent) << ", wrote " << path.string()
            << '\n';
  return 0;
}

int run_model1d(const std::string& kind_s, double gamma, double beta, double l, int grid,
                const std::string& out_dir, const std::string& echo) {
  model1d::Kind kind;
  if (kind_s == "rd")
    kind = model1d::Kind::RobinDirichlet;
  else if (kind_s == "rr")
    kind = model1d::Kind::RobinRobin;
  else if (kind_s == "rn")
    kind = model1d::Kind::RobinNeumann;
  else if (kind_s == "rrs")
    kind = model1d::Kind::RobinRobinSymmetric;
  else
    throw std::invalid_argument("--kind must be rd|rr|rn|rrs");
  const model1d::Secular1D op{kind, gamma, beta, l};
  const auto roots = model1d::negative_eigenvalues(op);
  const auto fd = model1d::fd_oracle_1d(op, grid);
  const fs::path path = fs::path(out_dir) / ("model1d_" + kind_s + ".csv");
  CsvWriter csv(path, echo, {"n", "E_secular", "E_fd", "difference"});
  for (size_t i = 0; i < roots.size(); ++i)
    csv.row({std::to_string(i + 1), num(roots[i]), num(fd[i]), num(roots[i] - fd[i])});
  if (roots.empty()) csv.comment("no negative eigenvalue for these parameters");
  std::cout << roots.size() << " negative eigenvalue(s), wrote " << path.string() << '\n';
  return 0;
}

int run_rates(const std::string& poly_file, const std::vector<double>& gammas, double tol,
              double beta_exp, int sector_refs, long long node_cap,
              const std::string& out_dir, const std::string& cache_dir,
              const std::string& echo) {
  if (gammas.size() < 3) throw std::invalid_argument("need >= 3 sweep points");
  const auto poly = load_poly(poly_file);
  const bool straight = poly.is_straight();
  sector::SectorPolicy spol;
  spol.refinements = sector_refs;
  spol.cache_dir = cache_dir;
  const auto model = sector::build_model_sum(poly, tol, spol);
  if (model.N_total == 0) throw std::runtime_error("no convex vertices: nothing to fit");
  const int track = std::min(model.N_total, 8);

  std::vector<std::vector<double>> dev(track);
  for (double gamma : gammas) {
    const auto mp = corner_mesh_policy(gamma, node_cap);
    const auto m = mesh_polygon(poly, mp);
    const auto p = fem::assemble(m, 2);
    eig::SolveOptions so;
    so.shift_hint = 1.25 * gamma * gamma * model.clusters.front().lambda;
    const auto res = eig::solve_lowest(p, gamma, track, 1e-9, so);
    for (int n = 0; n < track; ++n) {
      const double target = gamma * gamma * model.clusters[cluster_of(model, n)].lambda;
      dev[n].push_back(std::abs(res.eigenvalues[n] - target));
    }
    (void)beta_exp;
  }

  const fs::path path = fs::path(out_dir) / "rates.csv";
  CsvWriter csv(path, echo, {"n", "kind", "slope", "intercept", "r2"});
  for (int n = 0; n < track; ++n) {
    std::vector<double> xs, ys;
    for (size_t i = 0; i < gammas.size(); ++i) {
      if (!(dev[n][i] > 0)) continue;
      xs.push_back(straight ? gammas[i] : std::log(gammas[i]));
      ys.push_back(std::log(dev[n][i]));
    }
    if (xs.size() < 3) {
      csv.row({std::to_string(n + 1), straight ? "exp" : "power", "", "", ""});
      continue;
    }
    const Fit f = linear_fit(xs, ys);
    csv.row({std::to_string(n + 1), straight ? "exp" : "power", num(f.slope),
             num(f.intercept), num(f.r2)});
  }
  csv.comment(straight ? "exp: log|dev| vs gamma (straight edges, expect negative slope)"
                       : "power: log|dev| vs log gamma (curvilinear, expect slope <= 1.5)");
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int run_mesh(const std::string& action, const std::string& poly_file, double h, int levels,
             const std::string& in_base, const std::string& out_base, long long node_cap) {
  if (action == "gen") {
    if (poly_file.empty() || out_base.empty())
      throw std::invalid_argument("mesh gen needs --poly and --export");
    mesh::GradingPolicy pol;
    pol.target_h = h;
    pol.levels = levels;
    pol.node_cap = node_cap;
    const auto m = mesh_polygon(load_poly(poly_file), pol);
    export_mesh(m, out_base);
    std::cout << "nodes " << m.n_nodes() << ", triangles " << m.n_tris() << ", min angle "
              << num(m.min_angle_deg()) << " deg, wrote " << out_base << ".{node,ele,poly}\n";
    return 0;
  }
  if (in_base.empty()) throw std::invalid_argument("mesh " + action + " needs --import");
  const auto m = mesh::import_mesh(in_base);
  if (action == "inspect") {
    std::cout << "nodes " << m.n_nodes() << "\ntriangles " << m.n_tris() << "\nmin angle "
              << num(m.min_angle_deg()) << " deg\narea " << num(m.total_area())
              << "\nrobin boundary " << num(m.boundary_length(mesh::BoundaryTag::Robin))
              << "\ndirichlet boundary "
              << num(m.boundary_length(mesh::BoundaryTag::Dirichlet)) << '\n';
    return 0;
  }
  if (action == "convert") {
    if (out_base.empty()) throw std::invalid_argument("mesh convert needs --export");
    export_mesh(m, out_base);
    std::cout << "rewrote " << out_base << ".{node,ele,poly}\n";
    return 0;
  }
  throw std::invalid_argument("mesh action must be gen|inspect|convert");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral toolkit for Robin Laplacians on curvilinear polygons"};
  app.set_config("--config", "", "flat key=value config file; flags override");
  std::string out_dir = ".";
  std::string cache_dir;
  std::uint64_t seed = 0x524f42494eull;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--cache-dir", cache_dir, "sector spectrum cache directory");
  app.add_option("--seed", seed, "rng seed (recorded in outputs)");

  auto* c_sector = app.add_subcommand("sector", "reference sector spectrum below -1");
  double alpha = 0, tol = 1e-3, radius_override = 0;
  int sector_refs = 2;
  c_sector->add_option("--alpha", alpha, "half-angle in (0, pi)")
      ->required()
      ->check(CLI::Range(1e-9, std::numbers::pi - 1e-9));
  c_sector->add_option("--tol", tol, "essential-spectrum margin scale");
  c_sector->add_option("--radius", radius_override, "override the truncation radius");
  c_sector->add_option("--refinements", sector_refs, "mesh refinement rounds");

  auto* c_corners = app.add_subcommand("corners", "corner-driven eigenvalue clusters");
  std::string poly_file;
  std::vector<double> gammas;
  double beta_exp = 2.0 / 3.0;
  long long node_cap = 200000;
  int corners_refs = 3;
  c_corners->add_option("--poly", poly_file, "polygon description file")->required();
  c_corners->add_option("--gammas", gammas, "Robin parameters")->required()->delimiter(',');
  c_corners->add_option("--tol", tol, "sector tolerance");
  c_corners->add_option("--beta", beta_exp, "curvilinear cutoff exponent in (1/2,1)");
  c_corners->add_option("--sector-refinements", corners_refs, "sector mesh refinements");
  c_corners->add_option("--node-cap", node_cap, "mesh node budget");

  auto* c_weyl = app.add_subcommand("weyl", "eigenvalue counting sweeps");
  std::string regime = "bulk";
  double param = -0.5;
  c_weyl->add_option("--poly", poly_file, "polygon description file")->required();
  c_weyl->add_option("--regime", regime, "bulk or edge")
      ->check(CLI::IsMember({"bulk", "edge"}));
  c_weyl->add_option("--param", param, "E in (-1,0) for bulk, lambda for edge")->required();
  c_weyl->add_option("--gammas", gammas, "Robin parameters")->required()->delimiter(',');
  c_weyl->add_option("--node-cap", node_cap, "mesh node budget");

  auto* c_m1 = app.add_subcommand("model1d", "one-dimensional model operators");
  std::string kind = "rd";
  double m1_gamma = 2.0, m1_beta = 0.5, m1_l = 1.0;
  int grid = 4000;
  c_m1->add_option("--kind", kind, "rd|rr|rn|rrs")->required();
  c_m1->add_option("--gamma", m1_gamma, "left Robin parameter")->required();
  c_m1->add_option("--beta", m1_beta, "right Robin parameter (rr)");
  c_m1->add_option("--l", m1_l, "interval length")->required();
  c_m1->add_option("--grid", grid, "finite-difference oracle grid")->check(CLI::Range(100, 100000));

  auto* c_rates = app.add_subcommand("rates", "deviation rate fits over a gamma sweep");
  c_rates->add_option("--poly", poly_file, "polygon description file")->required();
  c_rates->add_option("--gammas", gammas, "at least 3 Robin parameters")
      ->required()
      ->delimiter(',');
  c_rates->add_option("--tol", tol, "sector tolerance");
  c_rates->add_option("--beta", beta_exp, "curvilinear cutoff exponent");
  c_rates->add_option("--sector-refinements", corners_refs, "sector mesh refinements");
  c_rates->add_option("--node-cap", node_cap, "mesh node budget");

  auto* c_mesh = app.add_subcommand("mesh", "generate / inspect / convert meshes");
  std::string action, in_base, out_base;
  double mesh_h = 0.1;
  int mesh_levels = 0;
  c_mesh->add_option("action", action, "gen|inspect|convert")->required();
  c_mesh->add_option("--poly", poly_file, "polygon description file");
  c_mesh->add_option("--size", mesh_h, "target mesh size");
  c_mesh->add_option("--levels", mesh_levels, "corner grading levels");
  c_mesh->add_option("--import", in_base, "input base path (.node/.ele[/.poly])");
  c_mesh->add_option("--export", out_base, "output base path");
  c_mesh->add_option("--node-cap", node_cap, "mesh node budget");

  app.fallthrough();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string echo = "seed=" + std::to_string(seed);
  for (int i = 1; i < argc; ++i) echo += std::string(" ") + argv[i];

  try {
    if (*c_sector)
      return run_sector(alpha, tol, out_dir, cache_dir, radius_override, sector_refs, echo);
    if (*c_corners)
      return run_corners(poly_file, gammas, tol, beta_exp, corners_refs, node_cap, out_dir,
                         cache_dir, echo);
    if (*c_weyl) return run_weyl(poly_file, regime, param, gammas, node_cap, out_dir, echo);
    if (*c_m1) return run_model1d(kind, m1_gamma, m1_beta, m1_l, grid, out_dir, echo);
    if (*c_rates)
      return run_rates(poly_file, gammas, tol, beta_exp, corners_refs, node_cap, out_dir,
                       cache_dir, echo);
    if (*c_mesh)
      return run_mesh(action, poly_file, mesh_h, mesh_levels, in_base, out_base, node_cap);
  } catch (const mesh::BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
