#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "robin/model1d.hpp"

#include <cmath>
#include <random>

using namespace robin;
using model1d::Kind;
using model1d::Secular1D;

namespace {

// Richardson-extrapolated finite-difference oracle (kills the h^2 term).
double fd_extrapolated(const Secular1D& op, int grid_n, int which = 0) {
  const double e1 = model1d::fd_oracle_1d(op, grid_n)[which];
  const double e2 = model1d::fd_oracle_1d(op, 2 * grid_n)[which];
  return (4 * e2 - e1) / 3.0;
}

}  // namespace

TEST_CASE("Robin-Dirichlet: negative eigenvalue iff gamma l > 1") {
  CHECK(model1d::negative_eigenvalues({Kind::RobinDirichlet, 0.9, 0, 1.0}).empty());
  CHECK(model1d::negative_eigenvalues({Kind::RobinDirichlet, 1.0 / 1.0, 0, 0.999}).empty());
  const auto ev = model1d::negative_eigenvalues({Kind::RobinDirichlet, 1.5, 0, 1.0});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] < 0);
}

TEST_CASE("Robin-Dirichlet gamma=5 l=1 matches the two-term expansion") {
  const auto ev = model1d::negative_eigenvalues({Kind::RobinDirichlet, 5.0, 0, 1.0});
  REQUIRE(ev.size() == 1);
  // frozen secular root (cross-checked against an independent solver)
  CHECK(ev[0] == doctest::Approx(-24.995456292233).epsilon(1e-10));
  const double expansion = -25.0 + 100.0 * std::exp(-10.0);
  CHECK(std::abs(ev[0] - expansion) < 1e-5);  // O(e^{-4 gamma l}) with a gamma^3 factor
}

TEST_CASE("Robin-Robin gamma=10 beta=1 l=1 lies in the bracket") {
  const auto ev = model1d::negative_eigenvalues({Kind::RobinRobin, 10.0, 1.0, 1.0});
  REQUIRE(ev.size() == 1);  // gamma > 2 beta and gamma l > 1: unique
  CHECK(ev[0] > -100.0 - 123.0 * 100.0 * std::exp(-20.0));
  CHECK(ev[0] < -100.0);
  CHECK(ev[0] == doctest::Approx(-100.000001007675).epsilon(1e-12));
}

TEST_CASE("bracketing of Prop-2.3 type holds on a (gamma, l) grid") {
  // gamma*l capped so the exponentially thin bracket stays representable
  for (double gamma : {1.5, 2.5, 4.0, 6.0, 8.0}) {
    for (double l : {0.8, 1.0, 1.2, 1.5, 1.8}) {
      const double beta = 0.45 * gamma;  // gamma > 2 beta
      if (gamma * l <= 1) continue;
      const auto ev = model1d::negative_eigenvalues({Kind::RobinRobin, gamma, beta, l});
      REQUIRE(!ev.empty());
      CHECK(ev[0] > -gamma * gamma - 123.0 * gamma * gamma * std::exp(-2 * gamma * l));
      CHECK(ev[0] < -gamma * gamma);
    }
  }
}

TEST_CASE("Robin-Neumann has one negative eigenvalue near -gamma^2") {
  const auto ev = model1d::negative_eigenvalues({Kind::RobinNeumann, 10.0, 0, 1.0});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] < -100.0);  // k > gamma for the Neumann branch
  CHECK(std::abs(ev[0] + 100.0) < 100 * 5 * std::exp(-2 * 10.0));
}

TEST_CASE("symmetric Robin-Robin has the even/odd pair for gamma l > 2") {
  const auto ev = model1d::negative_eigenvalues({Kind::RobinRobinSymmetric, 10.0, 10.0, 1.0});
  REQUIRE(ev.size() == 2);
  CHECK(ev[0] == doctest::Approx(-100.018145150398).epsilon(1e-10));  // even
  CHECK(ev[1] == doctest::Approx(-99.981825168933).epsilon(1e-10));   // odd
  // gamma l < 2: only the even mode
  CHECK(model1d::negative_eigenvalues({Kind::RobinRobinSymmetric, 1.5, 1.5, 1.0}).size() == 1);
}

TEST_CASE("secular roots agree with the FD oracle on random parameters") {
  std::mt19937_64 rng(20250809);
  std::uniform_real_distribution<double> g_dist(1.5, 4.2), l_dist(0.7, 1.3);
  int tested = 0;
  while (tested < 20) {
    const double gamma = g_dist(rng), l = l_dist(rng);
    if (gamma * l <= 1.2) continue;
    ++tested;
    const Kind kind = static_cast<Kind>(tested % 4);
    Secular1D op{kind, gamma, 0.45 * gamma, l};
    const auto roots = model1d::negative_eigenvalues(op);
    const auto fd = model1d::fd_oracle_1d(op, 4000);
    for (size_t i = 0; i < roots.size(); ++i)
      CHECK(std::abs(roots[i] - fd[i]) < 1e-5);
  }
}

TEST_CASE("FD oracle: no negative eigenvalue when gamma l < 1 (Robin-Dirichlet)") {
  const auto fd = model1d::fd_oracle_1d({Kind::RobinDirichlet, 0.8, 0, 1.0}, 4000);
  CHECK(fd[0] >= -1e-3);
}

TEST_CASE("FD oracle tracks the Robin-Neumann secular root") {
  const Secular1D op{Kind::RobinNeumann, 10.0, 0, 1.0};
  const auto roots = model1d::negative_eigenvalues(op);
  CHECK(std::abs(fd_extrapolated(op, 2000) - roots[0]) < 1e-6);
  CHECK(std::abs(roots[0] + 100.0) < 100 * 5 * std::exp(-20.0));
}

TEST_CASE("remainder of the Robin-Dirichlet expansion matches its next-order term") {
  // E_1 = -g^2 + 4 g^2 e^{-2gl} + (16 g^3 l - 8 g^2) e^{-4gl} (1 + o(1))
  const double l = 1.0;
  for (double g : {3.0, 4.0, 5.0, 6.0}) {
    const auto ev = model1d::negative_eigenvalues({Kind::RobinDirichlet, g, 0, l});
    const double r = ev[0] + g * g - 4 * g * g * std::exp(-2 * g * l);
    const double pred = (16 * g * g * g * l - 8 * g * g) * std::exp(-4 * g * l);
    CHECK(std::abs(r) / pred == doctest::Approx(1.0).epsilon(0.06));
  }
}

TEST_CASE("remainder log-slope sits within 15% of -4l (l = 1.5 grid)") {
  const double l = 1.5;
  std::vector<double> gs = {3, 4, 5, 6}, logr;
  for (double g : gs) {
    const auto ev = model1d::negative_eigenvalues({Kind::RobinDirichlet, g, 0, l});
    logr.push_back(std::log(std::abs(ev[0] + g * g - 4 * g * g * std::exp(-2 * g * l))));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < gs.size(); ++i) {
    sx += gs[i];
    sy += logr[i];
    sxx += gs[i] * gs[i];
    sxy += gs[i] * logr[i];
  }
  const int n = static_cast<int>(gs.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope < -4 * l * 0.85);
  CHECK(slope > -4 * l * 1.15);
}

TEST_CASE("square oracle: lowest four sums cluster near -2 gamma^2") {
  const auto sums = model1d::square_oracle(10.0, 1.0, 6);
  REQUIRE(sums.size() == 6);
  CHECK(sums[0] == doctest::Approx(-200.036290301).epsilon(1e-9));
  CHECK(sums[1] == doctest::Approx(-199.999970319).epsilon(1e-9));
  CHECK(sums[2] == doctest::Approx(sums[1]).epsilon(1e-12));  // even x odd symmetry
  CHECK(sums[3] == doctest::Approx(-199.963650338).epsilon(1e-9));
  CHECK(sums[0] < -200.0);  // even-mode k exceeds gamma
  for (int i = 0; i < 4; ++i) CHECK(std::abs(sums[i] + 200.0) < 4 * 100 * std::exp(-10.0) * 2.2);
  // fifth eigenvalue: boundary-layer branch E_even + mu_1^2
  CHECK(sums[4] == doctest::Approx(-84.946546786).epsilon(1e-9));
}

TEST_CASE("square oracle ground state approaches -2 gamma^2 exponentially") {
  double prev = 0;
  for (double g : {6.0, 8.0, 10.0, 12.0}) {
    const auto sums = model1d::square_oracle(g, 1.0, 1);
    const double dev = std::abs(sums[0] + 2 * g * g);
    CHECK(dev > 0);
    if (prev > 0) CHECK(dev < 0.3 * prev);  // at least geometric decay in gamma
    prev = dev;
  }
}

TEST_CASE("square oracle enforces its precondition") {
  CHECK_THROWS(model1d::square_oracle(1.5, 1.0, 4));
}

TEST_CASE("1D spectrum is ascending and complete enough for sums") {
  const auto ev = model1d::one_d_spectrum(10.0, 1.0, 12);
  REQUIRE(static_cast<int>(ev.size()) == 12);
  for (size_t i = 1; i < ev.size(); ++i) CHECK(ev[i] >= ev[i - 1]);
  CHECK(ev[0] < -100);
  CHECK(ev[1] > -100);
  CHECK(ev[1] < -99.9);
  CHECK(ev[2] > 0);  // trigonometric branch starts
}
