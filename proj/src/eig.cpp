#include "robin/eig.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace robin::eig {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double max_abs_coeff(const SpMat& A) {
  double v = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

// Inertia (number of negative pivots) of A via unpivoted sparse LDL'.
// Returns nullopt on breakdown or a pivot below the relative floor.
std::optional<long long> ldlt_negative_count(const SpMat& A, double pivot_floor) {
  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.compute(A);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const VectorXd d = ldlt.vectorD();
  long long neg = 0;
  for (int i = 0; i < d.size(); ++i) {
    const double di = d[i];
    if (!std::isfinite(di) || std::abs(di) < pivot_floor) return std::nullopt;
    if (di < 0) ++neg;
  }
  return neg;
}

VectorXd residuals_of(const fem::SpectralPencil& p, double gamma, const VectorXd& evals,
                      const MatrixXd& vecs) {
  VectorXd r(evals.size());
  for (int i = 0; i < evals.size(); ++i) {
    const VectorXd x = vecs.col(i);
    const VectorXd res = p.K * x - gamma * (p.B * x) - evals[i] * (p.M * x);
    const double xm = std::sqrt(x.dot(p.M * x));
    r[i] = res.norm() / xm;
  }
  return r;
}

EigenResult solve_dense(const fem::SpectralPencil& p, double gamma, int n) {
  const MatrixXd A = MatrixXd(p.K) - gamma * MatrixXd(p.B);
  const MatrixXd M = MatrixXd(p.M);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(A, M);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  EigenResult out;
  out.gamma = gamma;
  out.eigenvalues = es.eigenvalues().head(n);
  out.eigenvectors = es.eigenvectors().leftCols(n);
  out.residuals = residuals_of(p, gamma, out.eigenvalues, out.eigenvectors);
  return out;
}

// M-orthonormalize the columns of X in place (modified Gram-Schmidt, twice).
// A column that collapses is replaced by a fresh random direction.
void m_orthonormalize(const SpMat& M, MatrixXd& X, std::mt19937_64& rng) {
  const int n = static_cast<int>(X.cols());
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd MX(X.rows(), n);
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < n; ++j) {
      for (int tries = 0; tries < 4; ++tries) {
        for (int i = 0; i < j; ++i) {
          const double c = MX.col(i).dot(X.col(j));
          X.col(j) -= c * X.col(i);
        }
        const VectorXd mx = M * X.col(j);
        const double nrm = std::sqrt(std::max(0.0, X.col(j).dot(mx)));
        if (nrm > 1e-13 * std::sqrt(static_cast<double>(X.rows()))) {
          X.col(j) /= nrm;
          MX.col(j) = mx / nrm;
          break;
        }
        if (tries == 3) throw std::runtime_error("subspace became degenerate");
        for (int i = 0; i < X.rows(); ++i) X(i, j) = gauss(rng);
      }
    }
  }
}

// One subspace-iteration sweep at a fixed shift, deflating against locked
// vectors. Returns Ritz pairs; `converged[j]` marks residual-satisfying pairs.
struct SweepResult {
  VectorXd evals;
  MatrixXd vecs;
  std::vector<char> converged;
};

SweepResult subspace_sweep(const SpMat& A, const SpMat& M,
                           Eigen::SimplicialLDLT<SpMat>& fact, const MatrixXd& locked,
                           int block, int want, double tol, int max_iters,
                           std::mt19937_64& rng) {
  const int dim = static_cast<int>(A.rows());
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(dim, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < dim; ++i) X(i, j) = gauss(rng);
  if (locked.cols() == 0) X.col(0).setOnes();

  MatrixXd Mlocked(dim, locked.cols());
  for (int j = 0; j < locked.cols(); ++j) Mlocked.col(j) = M * locked.col(j);

  SweepResult best;
  double prev_worst = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 0; it < max_iters; ++it) {
    MatrixXd Y(dim, block);
    for (int j = 0; j < block; ++j) Y.col(j) = fact.solve(M * X.col(j));
    if (locked.cols() > 0)
      Y -= locked * (Mlocked.transpose() * Y);  // deflation
    m_orthonormalize(M, Y, rng);
    MatrixXd AY(dim, block);
    for (int j = 0; j < block; ++j) AY.col(j) = A * Y.col(j);
    MatrixXd Ap = Y.transpose() * AY;
    Ap = 0.5 * (Ap + Ap.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> small(Ap);
    X = Y * small.eigenvectors();

    best.evals = small.eigenvalues();
    best.vecs = X;
    best.converged.assign(block, 0);
    double worst = 0;
    const MatrixXd R = AY * small.eigenvectors();
    for (int j = 0; j < block; ++j) {
      const VectorXd r = R.col(j) - best.evals[j] * (M * X.col(j));
      const double rel = r.norm() / std::max(1.0, std::abs(best.evals[j]));
      best.converged[j] = rel <= tol;
      if (j < want) worst = std::max(worst, best.converged[j] ? 0.0 : rel);
    }
    if (worst == 0.0) return best;
    if (it >= 20) {
      if (worst > 0.7 * prev_worst) {
        if (++stall >= 8) return best;  // let the caller re-shift
      } else {
        stall = 0;
      }
    }
    prev_worst = worst;
  }
  return best;
}

Eigen::SimplicialLDLT<SpMat>* factor_at(const SpMat& A, const SpMat& M, double sigma,
                                        Eigen::SimplicialLDLT<SpMat>& fact) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    fact.compute((A - sigma * M).pruned());
    if (fact.info() == Eigen::Success) {
      bool clean = true;
      const VectorXd d = fact.vectorD();
      for (int i = 0; i < d.size(); ++i)
        if (!std::isfinite(d[i]) || d[i] == 0) clean = false;
      if (clean) return &fact;
    }
    sigma = sigma * (1.0 + 1e-10) - 1e-10;
  }
  throw std::runtime_error("shift factorization broke down");
}

EigenResult solve_sparse(const fem::SpectralPencil& p, double gamma, int n, double tol,
                         const SolveOptions& opts) {
  const int dim = p.n_dofs;
  const SpMat A = (p.K - gamma * p.B).pruned();
  const double scale = std::max(max_abs_coeff(A), max_abs_coeff(p.M));
  std::mt19937_64 rng(opts.seed);

  // opening shift certified below E_1 by inertia
  double sigma = opts.shift_hint.value_or(-2.0 * gamma * gamma - 1.0);
  if (!(sigma < 0)) sigma = -1.0;
  {
    bool ok = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const auto inertia = ldlt_negative_count((A - sigma * p.M).pruned(), 1e-14 * scale);
      if (inertia && *inertia == 0) {
        ok = true;
        break;
      }
      sigma = 2.0 * sigma - 1.0;
    }
    if (!ok) throw std::runtime_error("could not find a shift below the spectrum");
  }

  MatrixXd locked(dim, 0);
  VectorXd locked_evals(0);
  Eigen::SimplicialLDLT<SpMat> fact;
  for (int round = 0; round < 8 && locked.cols() < n; ++round) {
    factor_at(A, p.M, sigma, fact);
    const int missing = n - static_cast<int>(locked.cols());
    const int block = std::min(dim - static_cast<int>(locked.cols()),
                               missing + std::max(2, opts.guard));
    if (block <= 0) break;
    SweepResult sw = subspace_sweep(A, p.M, fact, locked, block, missing, tol,
                                    opts.max_iterations, rng);
    // lock converged pairs from the bottom of this sweep
    int took = 0;
    for (int j = 0; j < sw.evals.size() && took < missing; ++j) {
      if (!sw.converged[j]) break;  // keep the locked set contiguous per sweep
      locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
      locked.col(locked.cols() - 1) = sw.vecs.col(j);
      locked_evals.conservativeResize(locked_evals.size() + 1);
      locked_evals[locked_evals.size() - 1] = sw.evals[j];
      ++took;
    }
    if (locked.cols() >= n) break;
    // re-shift just below the first unresolved Ritz estimate, at an offset
    // matched to the local gap so the next sweep separates it quickly
    const int next = took;
    if (next < sw.evals.size()) {
      const double target = sw.evals[next];
      double off = 0.25 * std::abs(target);
      if (next + 1 < sw.evals.size()) {
        const double gap = sw.evals[next + 1] - sw.evals[next];
        off = std::clamp(0.5 * gap, 0.02 * std::abs(target), 0.5 * std::abs(target));
      }
      off = std::max({off, 1e-8 * scale, 1e-12});
      sigma = target - off;
    } else {
      sigma = 2.0 * sigma - 1.0;
    }
  }
  if (locked.cols() < n) throw std::runtime_error("shift-invert iteration did not converge");

  // final Rayleigh-Ritz over everything locked
  MatrixXd Y = locked;
  m_orthonormalize(p.M, Y, rng);
  MatrixXd Ap = Y.transpose() * (A * Y);
  Ap = 0.5 * (Ap + Ap.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> small(Ap);
  EigenResult out;
  out.gamma = gamma;
  out.eigenvalues = small.eigenvalues().head(n);
  out.eigenvectors = Y * small.eigenvectors().leftCols(n);
  out.residuals = residuals_of(p, gamma, out.eigenvalues, out.eigenvectors);

  // certify that nothing below the returned set was missed: strictly fewer
  // than j eigenvalues may lie below the j-th returned value
  for (int j = 0; j < n; ++j) {
    const double delta = std::max(1e-7 * std::abs(out.eigenvalues[j]), 1e-9);
    const double probe = out.eigenvalues[j] - delta;
    const auto cnt = ldlt_negative_count((A - probe * p.M).pruned(), 1e-14 * scale);
    if (cnt && *cnt > j)
      throw std::runtime_error("shift-invert missed an interior eigenvalue");
  }
  return out;
}

}  // namespace

EigenResult solve_lowest(const fem::SpectralPencil& p, double gamma, int n, double tol,
                         const SolveOptions& opts) {
  if (n < 1) throw std::invalid_argument("solve_lowest: n must be >= 1");
  if (n > p.n_dofs) throw std::invalid_argument("solve_lowest: n exceeds the dimension");
  if (p.n_dofs <= opts.dense_cutoff && !opts.force_sparse) return solve_dense(p, gamma, n);
  return solve_sparse(p, gamma, n, tol, opts);
}

CountResult count_below(const fem::SpectralPencil& p, double gamma, double threshold) {
  if (!std::isfinite(threshold)) throw std::invalid_argument("count_below: threshold not finite");
  CountResult out;
  out.threshold_used = threshold;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    const SpMat A = (p.K - gamma * p.B - out.threshold_used * p.M).pruned();
    const double floor = 1e-12 * max_abs_coeff(A);
    const auto neg = ldlt_negative_count(A, floor);
    if (neg) {
      out.count = *neg;
      out.retries = attempt;
      return out;
    }
    out.threshold_used = out.threshold_used * (1.0 + 1e-10) + 1e-10;
  }
  throw std::runtime_error("count_below: factorization broke down after perturbed retries");
}

}  // namespace robin::eig
