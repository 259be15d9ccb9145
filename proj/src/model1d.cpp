#include "robin/model1d.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace robin::model1d {

namespace {

// Bisection to ~2 ulp of the root; f(lo) and f(hi) must have opposite signs.
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// tanh(x) - 1, computed without cancellation.
double tanh_m1(double x) {
  const double e = std::exp(-2 * x);
  return -2 * e / (1 + e);
}

// Bisection in w = log(offset): the deep secular roots sit at offsets that
// can be exponentially small in gamma*l, far below the resolution of a plain
// k-space bracket.
double bisect_log(const std::function<double(double)>& f_of_delta, double wlo, double whi) {
  const double w = bisect([&](double w_) { return f_of_delta(std::exp(w_)); }, wlo, whi);
  return std::exp(w);
}

// Negative eigenvalues of the Robin-Robin operator: E = -k^2 where
// tanh(k l / 2) = u_minus(k),
//   u_minus(k) = ((k^2 + gb) - sqrt((k^2 - g^2)(k^2 - b^2))) / (k (g + b)).
// Always one root above max(g,b); one more below min(g,b) iff l g b > g + b.
// Returned pairs are (E, 0) ascending.
std::vector<double> robin_robin_roots_e(double g, double b, double l) {
  std::vector<double> es;
  const double m = std::max(g, b), mn = std::min(g, b);
  // deep root k = m + delta: f = (tanh(kl/2) - 1) + (sqrt(disc) - (k-g)(k-b)) / (k(g+b))
  // with disc = (k-g)(k+g)(k-b)(k+b); k-g and k-b kept exact via delta.
  const auto fdeep = [&](double delta) {
    const double k = m + delta;
    const double km_g = (m == g) ? delta : k - g;
    const double km_b = (m == b) ? delta : k - b;
    const double disc = km_g * (k + g) * km_b * (k + b);
    return tanh_m1(k * l / 2) + (std::sqrt(disc) - km_g * km_b) / (k * (g + b));
  };
  {
    double dhi = g + b + 10.0 / l - m;
    int guard = 0;
    while (fdeep(dhi) <= 0 && guard++ < 60) dhi *= 2;
    const double delta = bisect_log(fdeep, std::log(m) - 160.0, std::log(dhi));
    es.push_back(-(m * m + delta * (2 * m + delta)));
  }
  // shallow root in (0, min(g,b)), present iff l g b > g + b
  if (l * g * b > g + b) {
    const auto f = [&](double k) {
      const double disc = (k * k - g * g) * (k * k - b * b);
      const double u = (k * k + g * b - std::sqrt(std::max(0.0, disc))) / (k * (g + b));
      return std::tanh(k * l / 2) - u;
    };
    const double hi = mn * (1 - 1e-14);
    double lo = mn * 1e-12;
    int guard = 0;
    while (f(lo) <= 0 && guard++ < 40) lo *= 0.25;
    if (f(lo) > 0 && f(hi) < 0) {
      const double k = bisect(f, lo, hi);
      es.push_back(-k * k);
    } else {
      // the root hugs min(g,b) closer than the bracket resolves (large l*min):
      // solve for the offset delta = min(g,b) - k in log space, with
      // f = (tanh(kl/2) - 1) + (sqrt(disc) - (g-k)(b-k)) / (k(g+b))
      const auto fnear = [&](double delta) {
        const double k = mn - delta;
        const double gm_k = (g - mn) + delta;  // g - k, exact
        const double bm_k = (b - mn) + delta;  // b - k, exact
        const double disc = gm_k * (g + k) * bm_k * (b + k);
        return tanh_m1(k * l / 2) + (std::sqrt(disc) - gm_k * bm_k) / (k * (g + b));
      };
      const double dhi = mn * 0.5;
      if (fnear(dhi) > 0) {
        const double delta = bisect_log(fnear, std::log(mn) - 160.0, std::log(dhi));
        es.push_back(-(mn * mn - delta * (2 * mn - delta)));
      }
    }
  }
  std::sort(es.begin(), es.end());
  return es;
}

}  // namespace

std::vector<double> negative_eigenvalues(const Secular1D& op) {
  if (!(op.l > 0) || !(op.gamma > 0))
    throw std::invalid_argument("1D operator needs gamma > 0 and l > 0");
  const double g = op.gamma, l = op.l;
  std::vector<double> out;
  switch (op.kind) {
    case Kind::RobinDirichlet: {
      if (g * l <= 1) return {};
      // k = g - delta: f = (tanh(kl) - 1) + delta/g
      const auto f = [&](double delta) { return tanh_m1((g - delta) * l) + delta / g; };
      const double delta = bisect_log(f, std::log(g) - 160.0, std::log(g * (1 - 1e-9)));
      out.push_back(-(g * g - delta * (2 * g - delta)));
      break;
    }
    case Kind::RobinNeumann: {
      // k = g + delta: f = (tanh(kl) - 1) + delta/k
      const auto f = [&](double delta) {
        return tanh_m1((g + delta) * l) + delta / (g + delta);
      };
      double dhi = 10.0 / l + 1;
      int guard = 0;
      while (f(dhi) <= 0 && guard++ < 60) dhi *= 2;
      const double delta = bisect_log(f, std::log(g) - 160.0, std::log(dhi));
      out.push_back(-(g * g + delta * (2 * g + delta)));
      break;
    }
    case Kind::RobinRobin: {
      if (!(op.beta > 0))
        throw std::invalid_argument("RobinRobin needs beta > 0");
      out = robin_robin_roots_e(g, op.beta, l);
      break;
    }
    case Kind::RobinRobinSymmetric: {
      out = robin_robin_roots_e(g, g, l);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> one_d_spectrum(double gamma, double l, int count) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  std::vector<double> ev =
      negative_eigenvalues({Kind::RobinRobinSymmetric, gamma, gamma, l});
  // nonnegative branch: even modes solve tan(mu l/2) = -gamma/mu on
  // ((2j-1)pi/2, j pi), odd modes solve tan(mu l/2) = mu/gamma on
  // (j pi, j pi + pi/2), one root per interval (x = mu l / 2).
  const double pi = std::numbers::pi;
  std::vector<double> mus;
  const auto even_f = [&](double x) {
    const double mu = 2 * x / l;
    return std::tan(x) + gamma / mu;
  };
  const auto odd_f = [&](double x) {
    const double mu = 2 * x / l;
    return std::tan(x) - mu / gamma;
  };
  // a low odd root in (0, pi/2) exists when gamma l < 2
  if (gamma * l < 2) {
    const double a = 1e-9, b = pi / 2 - 1e-9;
    if (odd_f(a) * odd_f(b) < 0) mus.push_back(2 * bisect(odd_f, a, b) / l);
  }
  for (int j = 1; static_cast<int>(ev.size() + mus.size()) < count + 2; ++j) {
    {
      const double a = (2 * j - 1) * pi / 2 + 1e-9, b = j * pi - 1e-12;
      mus.push_back(2 * bisect(even_f, a, b) / l);
    }
    {
      const double a = j * pi + 1e-12, b = j * pi + pi / 2 - 1e-9;
      mus.push_back(2 * bisect(odd_f, a, b) / l);
    }
    if (j > count + 4) break;
  }
  for (double mu : mus) ev.push_back(mu * mu);
  std::sort(ev.begin(), ev.end());
  if (static_cast<int>(ev.size()) > count) ev.resize(count);
  return ev;
}

std::vector<double> square_oracle(double gamma, double side, int n) {
  if (!(gamma * side > 2))
    throw std::invalid_argument("square_oracle requires gamma*side > 2");
  if (n < 1) throw std::invalid_argument("square_oracle: n must be >= 1");
  int m = n + 8;
  for (int rounds = 0; rounds < 6; ++rounds) {
    const std::vector<double> one_d = one_d_spectrum(gamma, side, m + 1);
    std::vector<double> sums;
    sums.reserve(static_cast<size_t>(m) * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) sums.push_back(one_d[i] + one_d[j]);
    std::sort(sums.begin(), sums.end());
    // sums not formed involve one factor >= one_d[m]; safe when the n-th
    // candidate is below one_d[m] + one_d[0]
    if (sums[n - 1] <= one_d[m] + one_d[0]) {
      sums.resize(n);
      return sums;
    }
    m *= 2;
  }
  throw std::runtime_error("square_oracle failed to stabilize the sum list");
}

namespace {

// Sturm count for the symmetric tridiagonal pencil (T - lambda S),
// S diagonal positive: number of eigenvalues below lambda.
int sturm_count(const std::vector<double>& diag, const std::vector<double>& off,
                const std::vector<double>& s, double lambda) {
  const int n = static_cast<int>(diag.size());
  int neg = 0;
  double d = diag[0] - lambda * s[0];
  if (d == 0) d = -1e-300;
  if (d < 0) ++neg;
  for (int i = 1; i < n; ++i) {
    d = (diag[i] - lambda * s[i]) - off[i - 1] * off[i - 1] / d;
    if (d == 0) d = -1e-300;
    if (d < 0) ++neg;
  }
  return neg;
}

}  // namespace

std::vector<double> fd_oracle_1d(const Secular1D& op, int grid_n) {
  if (grid_n < 100) throw std::invalid_argument("fd_oracle_1d: grid_n must be >= 100");
  const double g = op.gamma, l = op.l;
  const double beta = op.kind == Kind::RobinRobinSymmetric ? g : op.beta;
  const int N = grid_n;
  const double h = l / N;

  // symmetrized ghost-node finite differences; S is the diagonal weight
  std::vector<double> diag, off, s;
  const bool dirichlet_right = op.kind == Kind::RobinDirichlet;
  const int n_nodes = dirichlet_right ? N : N + 1;
  diag.resize(n_nodes);
  s.assign(n_nodes, 1.0);
  off.assign(n_nodes - 1, -1.0 / (h * h));
  for (int i = 0; i < n_nodes; ++i) diag[i] = 2.0 / (h * h);
  diag[0] = 1.0 / (h * h) - g / h;
  s[0] = 0.5;
  if (!dirichlet_right) {
    s[n_nodes - 1] = 0.5;
    switch (op.kind) {
      case Kind::RobinNeumann:
        diag[n_nodes - 1] = 1.0 / (h * h);
        break;
      case Kind::RobinRobin:
      case Kind::RobinRobinSymmetric:
        diag[n_nodes - 1] = 1.0 / (h * h) - beta / h;
        break;
      default:
        break;
    }
  }

  double lo = -3 * (g + std::max(beta, 0.0)) * (g + std::max(beta, 0.0)) - 20.0 / (l * l) - 10;
  int guard = 0;
  while (sturm_count(diag, off, s, lo) > 0 && guard++ < 60) lo = 2 * lo - 1;
  double hi_all = std::pow(20.0 / l, 2) + 10 * (g * g + beta * beta) + 10;
  guard = 0;
  while (sturm_count(diag, off, s, hi_all) < 5 && guard++ < 60) hi_all = 2 * hi_all + 1;

  std::vector<double> out;
  for (int j = 1; j <= 5; ++j) {
    double a = lo, b = hi_all;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid == a || mid == b) break;
      if (sturm_count(diag, off, s, mid) >= j)
        b = mid;
      else
        a = mid;
      if (b - a <= 1e-13 * std::max(1.0, std::abs(b))) break;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

}  // namespace robin::model1d
