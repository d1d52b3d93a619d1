#pragma once

#include <functional>
#include <vector>

#include "warpflow/cone.hpp"

namespace warpflow {

// Generalized Laguerre polynomial L_j^{(alpha)}(x), forward recurrence.
double laguerre(int j, double alpha, double x);
// d/dx L_j^{(alpha)}(x) = -L_{j-1}^{(alpha+1)}(x)
double laguerre_deriv(int j, double alpha, double x);

// ---------------------------------------------------------------------------
// Mode bookkeeping for the drift operators linearized at the cone:
//   D_U = d2 + (n/g - g/2B^2) d1 + 2(n-1)/g^2   on L^2_{n, 1/2B^2}
//   D_Z = d2 + ((n-2)/g - g/2B^2) d1 - 2(n-1)/g^2 on L^2_{n-2, 1/2B^2}
// B^2 lam_k = -k + (n-1)/4 - sqrt((n-9)(n-1))/4 ;  B^2 h_j = -(j+1)
// ---------------------------------------------------------------------------
class Spectrum {
 public:
  explicit Spectrum(const ConeParams& cone);

  const ConeParams& cone() const { return cone_; }
  double laguerre_alpha() const { return alpha_; }        // sqrt((n-9)(n-1))/2
  double exp_a() const { return exp_a_; }                 // 2k + 2 B^2 lam_k (k-free)

  double B2_lambda(int k) const;
  double lambda_u(int k) const { return B2_lambda(k) / cone_.B2(); }
  double B2_h(int j) const { return -(double(j) + 1.0); }
  double h_z(int j) const { return B2_h(j) / cone_.B2(); }
  double alpha_k(int k) const;  // -2 B^2 lam_k / (n - 1 - sqrt((n-9)(n-1)))

  double c_k(int k) const;  // U-mode normalization
  double d_j(int j) const;  // Z-mode normalization

  double eigenfunction_u(int k, double gamma) const;
  double eigenfunction_u_d1(int k, double gamma) const;
  double eigenfunction_u_d2(int k, double gamma) const;
  double eigenfunction_z(int j, double gamma) const;
  double eigenfunction_z_d1(int j, double gamma) const;
  double eigenfunction_z_d2(int j, double gamma) const;

  // Small/large-gamma reference constants of the mode Z_{lam_k} as printed in
  // the source proposition; c_k_pp_ref is singular when 2 B^2 lam_k = -1.
  double c_k_prime(int k) const;
  double c_k_doubleprime_ref(int k) const;

  // Exact resolvent mode: Z_{lam_k}(g) = g^{-exp_a} H_k(g^2/(4B^2)) with H_k a
  // degree-k polynomial; coefficients from a small linear solve.
  std::vector<double> resolvent_poly_coeffs(int k) const;
  double resolvent_mode_exact(int k, double gamma) const;
  double resolvent_mode_exact_d1(int k, double gamma) const;
  double resolvent_mode_exact_d2(int k, double gamma) const;

 private:
  ConeParams cone_;
  double alpha_ = 0.0;
  double exp_a_ = 0.0;
};

// ---------------------------------------------------------------------------
// Gauss-Laguerre quadrature for integrals  int_0^inf F(x) x^alpha e^{-x} dx.
// ---------------------------------------------------------------------------
class GaussLaguerre {
 public:
  GaussLaguerre(double alpha, int n);
  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& weights() const { return w_; }
  double integrate(const std::function<double(double)>& F) const;

 private:
  std::vector<double> x_, w_;
};

// Weighted inner product <f, g>_{a,b} = int_0^inf f g r^a e^{-b r^2/2} dr.
// `power_hint` sigma declares that f*g carries an r^sigma factor that should
// be folded into the quadrature weight (alpha-matched weight); with sigma = 0
// the plain (a-1)/2 exponent is used. Products of the mode families are
// integrated exactly with their natural hints.
class WeightedIP {
 public:
  WeightedIP(double a, double b, int nodes = 128, double power_hint = 0.0);
  double ip(const std::function<double(double)>& f, const std::function<double(double)>& g) const;
  double norm(const std::function<double(double)>& f) const;
  // r-samples where integrand values are taken; useful for gridded fields
  const std::vector<double>& r_nodes() const { return r_; }
  double ip_samples(std::span<const double> fg_at_nodes) const;  // fg = f(r)*g(r)

 private:
  double a_, b_, sigma_, scale_;
  GaussLaguerre gl_;
  std::vector<double> r_;
};

struct HardyCheck {
  double ratio_mult = 0.0;  // ||r u|| / ||u||_H1
  double ratio_div = 0.0;   // ||u/r|| / ||u||_H1
  bool divergent = false;   // u/r quadrature grows under node refinement
};

HardyCheck hardy_constants_check(const std::function<double(double)>& u,
                                 const std::function<double(double)>& u_r, double a, double b);

// ---------------------------------------------------------------------------
// Modified Bessel function of the first kind. `scaled` returns e^{-x} I_nu(x).
// Power series below the switch point, asymptotic expansion above; relative
// accuracy ~1e-10 over nu in [0, 17], x >= 0.
// ---------------------------------------------------------------------------
double bessel_i(double nu, double x);
double bessel_i_scaled(double nu, double x);

// Gaussian tail F(R) = int_R^inf r^kappa e^{-b r^2/2} dr by quadrature,
// plus the leading-order ratio F(R) / ((1/b) R^{kappa-1} e^{-b R^2/2}).
struct ExpTail {
  double value = 0.0;
  double leading_ratio = 0.0;
};
ExpTail exp_tail(double R, double kappa, double b);

// ---------------------------------------------------------------------------
// Resolvent BVP: solve (lam_k - D_Z) Zt = N U_{lam_k}, N = -(4 p B^2/g) d1,
// as a two-point BVP on [gmin, gmax] with Robin conditions encoding the
// asymptotic power laws. Solved in log-gamma for uniform relative accuracy.
// ---------------------------------------------------------------------------
struct ResolventTable {
  std::vector<double> gamma;
  std::vector<double> Z;
  double c_prime_fit = 0.0;       // Z(g)/g^{-exp_a} near gmin
  double c_doubleprime_fit = 0.0; // Z(g)/g^{-2B^2 lam - 2} near gmax
  double homogeneous_fit = 0.0;   // Z(g)/g^{-2B^2 lam} near gmax
};

ResolventTable resolvent_z_lambda(const Spectrum& spec, int k, double gmin = 1e-3,
                                  double gmax = 30.0, int n_points = 40001);

// ---------------------------------------------------------------------------
// Semigroup e^{B^2 D dt} applied to a function sample.
// ---------------------------------------------------------------------------
enum class Operator { U, Z };
enum class SemigroupMethod { eigen_truncation, kernel };

struct SemigroupResult {
  std::vector<double> values;     // at requested gammas
  double tail_energy = 0.0;       // ||f||^2 - sum of kept coefficients^2 (eigen method)
};

// `f_power_hint` declares an r^sigma factor carried by f itself (0 for a
// generic smooth function; -exp_a when f is built from U-modes), so the
// eigen-method projections use the matched quadrature weight.
SemigroupResult semigroup_apply(const Spectrum& spec, const std::function<double(double)>& f,
                                double dtau, Operator which, SemigroupMethod method,
                                std::span<const double> gammas, int n_modes = 40,
                                int quad_nodes = 128, double f_power_hint = 0.0);

}  // namespace warpflow
