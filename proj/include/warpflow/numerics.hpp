#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace warpflow {

// Finite-difference weights on arbitrary nodes (Fornberg's algorithm).
// Returns weights w such that f^(m)(x0) ~= sum_i w[m][i] f(nodes[i]),
// for all orders m = 0..max_order.
std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes, int max_order);

// Derivative operator over a fixed 1d grid. Interior points use a centered
// 5-point stencil (4th order on smooth grids); boundaries fall back to
// one-sided stencils of width `edge_width` (default 5, 2nd order or better).
class GridDerivative {
 public:
  explicit GridDerivative(std::vector<double> nodes, int half_width = 2, int edge_width = 5);

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  // m-th derivative (m = 1 or 2) of the sampled function at node i.
  double deriv(std::span<const double> f, std::size_t i, int m) const;

  std::vector<double> deriv_all(std::span<const double> f, int m) const;

 private:
  std::vector<double> nodes_;
  int half_width_;
  // per node: first stencil index and weights for m=1,2
  std::vector<std::size_t> first_;
  std::vector<std::vector<double>> w1_, w2_;
};

// Symmetric parity extension about a pole located half outside the grid edge:
// ghost nodes mirror grid nodes across x_pole, values get `sign` (+1 even, -1 odd).
// Used for smooth-pole closures where the grid includes the pole point itself.
struct ParityPole {
  double x_pole = 0.0;
  int sign = 1;
};

// Tridiagonal solve (Thomas), diagonals (a = sub, b = diag, c = super).
// b is modified; rhs is overwritten with the solution.
void solve_tridiagonal(std::span<const double> sub, std::vector<double> diag,
                       std::span<const double> super, std::vector<double>& rhs);

// Eigen-decomposition of a symmetric tridiagonal matrix (implicit QL with shifts).
// On return `diag` holds eigenvalues ascending and `z` the first components of
// the orthonormal eigenvectors (needed for Golub-Welsch quadrature weights).
void symmetric_tridiagonal_eigen(std::vector<double>& diag, std::vector<double>& off,
                                 std::vector<double>& first_components);

// Monotone cubic interpolation (Fritsch-Carlson). Nodes strictly increasing.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> y);
  double operator()(double xq) const;
  double deriv(double xq) const;

 private:
  std::vector<double> x_, y_, d_;  // d_ = node derivatives
  std::size_t find(double xq) const;
};

// Plain cubic (4-point Lagrange) interpolation on a grid; used where
// monotonicity shaping is not wanted.
double interp_cubic(std::span<const double> x, std::span<const double> y, double xq);

// Adaptive Simpson quadrature. abs_tol guards intervals where the integrand
// vanishes; callers integrating tiny quantities should scale it accordingly.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12, double abs_tol = 1e-15, int max_depth = 28);

// C^2 bump: 1 for u <= 0, 0 for u >= 1 (quintic smoothstep in between).
struct SmoothBump {
  static double value(double u);
  static double d1(double u);
  static double d2(double u);
};

// Scalar root bracketing + bisection; throws if no sign change on [a, b].
double bisect(const std::function<double(double)>& f, double a, double b,
              double tol = 1e-13, int max_iter = 200);

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace warpflow
