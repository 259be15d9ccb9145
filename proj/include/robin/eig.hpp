#pragma once

#include "robin/fem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace robin::eig {

struct EigenResult {
  double gamma = 0;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // M-orthonormal columns
  Eigen::VectorXd residuals;     // ||(K - gamma B - E M)x|| / ||x||_M
};

struct SolveOptions {
  bool force_sparse = false;
  int dense_cutoff = 2000;
  std::optional<double> shift_hint;  // must lie below E_1; validated by inertia
  int guard = 8;                     // extra subspace vectors
  int max_iterations = 300;
  std::uint64_t seed = 0x524f42494eull;
};

/// Lowest n eigenpairs of (K - gamma B) x = E M x.
EigenResult solve_lowest(const fem::SpectralPencil& p, double gamma, int n, double tol,
                         const SolveOptions& opts = {});

struct CountResult {
  long long count = 0;
  double threshold_used = 0;  // equals the request unless a retry perturbed it
  int retries = 0;
};

/// Number of eigenvalues in (-inf, threshold), exactly, by LDL' inertia.
CountResult count_below(const fem::SpectralPencil& p, double gamma, double threshold);

}  // namespace robin::eig
