#pragma once

#include <vector>

namespace robin::model1d {

/// One-dimensional model operators f -> -f'' on (0, l): the left end always
/// carries the attractive Robin condition -f'(0) - gamma f(0) = 0, the right
/// end depends on the kind:
///   RobinDirichlet        f(l) = 0
///   RobinRobin            f'(l) - beta f(l) = 0
///   RobinNeumann          f'(l) = 0
///   RobinRobinSymmetric   f'(l) - gamma f(l) = 0
enum class Kind { RobinDirichlet, RobinRobin, RobinNeumann, RobinRobinSymmetric };

struct Secular1D {
  Kind kind = Kind::RobinDirichlet;
  double gamma = 1.0;
  double beta = 0.0;  // RobinRobin only
  double l = 1.0;
};

/// All negative eigenvalues E = -k^2 (0, 1 or 2 of them), ascending,
/// from the secular equations solved to 1e-13 relative in k.
std::vector<double> negative_eigenvalues(const Secular1D& op);

/// Full 1D spectrum of the symmetric Robin-Robin operator on (0, l):
/// negative eigenvalues followed by the nonnegative trigonometric branch,
/// ascending, at least `count` values.
std::vector<double> one_d_spectrum(double gamma, double l, int count);

/// The n smallest eigenvalues of the separable square problem on
/// (0, side)^2 with Robin parameter gamma on all sides: pairwise sums of the
/// 1D spectrum. Requires gamma*side > 2 so both negative 1D modes exist.
std::vector<double> square_oracle(double gamma, double side, int n);

/// Independent brute-force check: second-order finite differences with
/// one-sided boundary stencils, lowest 5 eigenvalues.
std::vector<double> fd_oracle_1d(const Secular1D& op, int grid_n);

}  // namespace robin::model1d
