#include "warpflow/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace warpflow {

namespace {
double lbinom(double a, double k) {
  return std::lgamma(a + 1.0) - std::lgamma(k + 1.0) - std::lgamma(a - k + 1.0);
}
double rbinom(double a, double k) { return std::exp(lbinom(a, k)); }
}  // namespace

double laguerre(int j, double alpha, double x) {
  require(j >= 0, "laguerre: j >= 0");
  require(alpha > -1.0, "laguerre: alpha > -1");
  if (j == 0) return 1.0;
  double lm1 = 1.0;
  double l = 1.0 + alpha - x;
  for (int i = 1; i < j; ++i) {
    const double lp1 = ((2.0 * i + 1.0 + alpha - x) * l - (i + alpha) * lm1) / (i + 1.0);
    lm1 = l;
    l = lp1;
  }
  return l;
}

double laguerre_deriv(int j, double alpha, double x) {
  if (j == 0) return 0.0;
  return -laguerre(j - 1, alpha + 1.0, x);
}

namespace {
double laguerre_deriv2(int j, double alpha, double x) {
  if (j <= 1) return 0.0;
  return laguerre(j - 2, alpha + 2.0, x);
}
}  // namespace

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

Spectrum::Spectrum(const ConeParams& cone) : cone_(cone) {
  require(cone_.spectral_available, "Spectrum: mode formulas need n >= 10");
  const double n = cone_.n;
  alpha_ = 0.5 * std::sqrt((n - 9.0) * (n - 1.0));
  exp_a_ = (n - 1.0) / 2.0 - alpha_;
}

double Spectrum::B2_lambda(int k) const {
  const double n = cone_.n;
  return -double(k) + (n - 1.0) / 4.0 - 0.25 * std::sqrt((n - 9.0) * (n - 1.0));
}

double Spectrum::alpha_k(int k) const {
  const double n = cone_.n;
  return -2.0 * B2_lambda(k) / (n - 1.0 - std::sqrt((n - 9.0) * (n - 1.0)));
}

double Spectrum::c_k(int k) const {
  const double B2 = cone_.B2();
  const double log_c2 = -std::log(2.0 * B2) + alpha_ * std::log(1.0 / (4.0 * B2)) +
                        std::lgamma(k + 1.0) - std::lgamma(k + alpha_ + 1.0);
  return std::exp(0.5 * log_c2);
}

double Spectrum::d_j(int j) const {
  const double B2 = cone_.B2();
  const double az = (cone_.n + 1.0) / 2.0;
  const double log_d2 = -std::log(cone_.B) + 0.5 * (cone_.n + 2.0) * std::log(1.0 / (4.0 * B2)) +
                        std::lgamma(j + 1.0) - std::lgamma(j + az + 1.0);
  return std::exp(0.5 * log_d2);
}

double Spectrum::eigenfunction_u(int k, double gamma) const {
  require(gamma > 0.0, "eigenfunction_u: gamma > 0");
  const double x = gamma * gamma / (4.0 * cone_.B2());
  return c_k(k) * std::pow(gamma, -exp_a_) * laguerre(k, alpha_, x);
}

double Spectrum::eigenfunction_u_d1(int k, double gamma) const {
  const double x = gamma * gamma / (4.0 * cone_.B2());
  const double H = laguerre(k, alpha_, x), H1 = laguerre_deriv(k, alpha_, x);
  return c_k(k) * std::pow(gamma, -exp_a_ - 1.0) * (-exp_a_ * H + 2.0 * x * H1);
}

double Spectrum::eigenfunction_u_d2(int k, double gamma) const {
  const double x = gamma * gamma / (4.0 * cone_.B2());
  const double H = laguerre(k, alpha_, x), H1 = laguerre_deriv(k, alpha_, x);
  const double H2 = laguerre_deriv2(k, alpha_, x);
  const double s = -exp_a_;
  return c_k(k) * std::pow(gamma, s - 2.0) *
         (s * (s - 1.0) * H + 2.0 * x * (2.0 * s + 1.0) * H1 + 4.0 * x * x * H2);
}

double Spectrum::eigenfunction_z(int j, double gamma) const {
  const double az = (cone_.n + 1.0) / 2.0;
  const double x = gamma * gamma / (4.0 * cone_.B2());
  return d_j(j) * gamma * gamma * laguerre(j, az, x);
}

double Spectrum::eigenfunction_z_d1(int j, double gamma) const {
  const double az = (cone_.n + 1.0) / 2.0;
  const double x = gamma * gamma / (4.0 * cone_.B2());
  const double H = laguerre(j, az, x), H1 = laguerre_deriv(j, az, x);
  return d_j(j) * gamma * (2.0 * H + 2.0 * x * H1);
}

double Spectrum::eigenfunction_z_d2(int j, double gamma) const {
  const double az = (cone_.n + 1.0) / 2.0;
  const double x = gamma * gamma / (4.0 * cone_.B2());
  const double H = laguerre(j, az, x), H1 = laguerre_deriv(j, az, x);
  const double H2 = laguerre_deriv2(j, az, x);
  return d_j(j) * (2.0 * H + 10.0 * x * H1 + 4.0 * x * x * H2);
}

double Spectrum::c_k_prime(int k) const {
  const double n = cone_.n, B2 = cone_.B2(), p = cone_.p;
  const double ea = exp_a_;
  return 4.0 * p * B2 * (-ea) / ((-ea - 2.0) * (n - 1.0 - ea)) * c_k(k) * rbinom(k + alpha_, k);
}

double Spectrum::c_k_doubleprime_ref(int k) const {
  const double B2 = cone_.B2(), p = cone_.p;
  const double B2l = B2_lambda(k);
  const double denom = 2.0 * B2l + 1.0;
  const double u_inf =
      c_k(k) * std::exp(-std::lgamma(k + 1.0)) * std::pow(-4.0 * B2, -double(k));
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return 8.0 * p * B2 * B2 * B2 * (B2l / B2) / denom * u_inf;
}

std::vector<double> Spectrum::resolvent_poly_coeffs(int k) const {
  // Z_{lam_k} = g^{-ea} H(x), x = g^2/(4B^2); matching powers of x in
  // (lam_k - D_Z) Z = -(4pB^2/g) U_{lam_k}' gives a bidiagonal system for H.
  const double n = cone_.n, B2 = cone_.B2(), p = cone_.p;
  const double ea = exp_a_;
  const double Q = ea * ea - (n - 3.0) * ea - 2.0 * (n - 1.0);
  const double S = -4.0 * p * B2 * c_k(k);
  // coefficients of L_k^{(alpha)}: lc_j = (-1)^j binom(k+alpha, k-j) / j!
  std::vector<double> lc(k + 1);
  for (int j = 0; j <= k; ++j) {
    const double mag = std::exp(lbinom(k + alpha_, k - j) - std::lgamma(j + 1.0));
    lc[j] = ((j % 2) ? -mag : mag);
  }
  std::vector<double> h(k + 1, 0.0);
  for (int j = 0; j <= k; ++j) {
    const double diag = -4.0 * j * (j - 1.0) - 2.0 * (n - 1.0 - 2.0 * ea) * j - Q;
    require(std::abs(diag) > 1e-12, "resolvent_poly_coeffs: resonant mode");
    double rhs = S * (2.0 * j - ea) * lc[j];
    if (j > 0) rhs -= (4.0 * (j - 1.0) - 4.0 * k) * h[j - 1];
    h[j] = rhs / diag;
  }
  return h;
}

double Spectrum::resolvent_mode_exact(int k, double gamma) const {
  const auto h = resolvent_poly_coeffs(k);
  const double x = gamma * gamma / (4.0 * cone_.B2());
  double H = 0.0;
  for (int j = k; j >= 0; --j) H = H * x + h[j];
  return std::pow(gamma, -exp_a_) * H;
}

double Spectrum::resolvent_mode_exact_d1(int k, double gamma) const {
  const auto h = resolvent_poly_coeffs(k);
  const double x = gamma * gamma / (4.0 * cone_.B2());
  double H = 0.0, H1 = 0.0;
  double xp = 1.0, xpm1 = 0.0;
  for (int j = 0; j <= k; ++j) {
    H += h[j] * xp;
    if (j >= 1) H1 += j * h[j] * xpm1;
    xpm1 = xp;
    xp *= x;
  }
  const double s = -exp_a_;
  return std::pow(gamma, s - 1.0) * (s * H + 2.0 * x * H1);
}

double Spectrum::resolvent_mode_exact_d2(int k, double gamma) const {
  const auto h = resolvent_poly_coeffs(k);
  const double x = gamma * gamma / (4.0 * cone_.B2());
  double H = 0.0, H1 = 0.0, H2 = 0.0;
  double xp = 1.0, xpm1 = 0.0, xpm2 = 0.0;
  for (int j = 0; j <= k; ++j) {
    H += h[j] * xp;
    if (j >= 1) H1 += j * h[j] * xpm1;
    if (j >= 2) H2 += j * (j - 1.0) * h[j] * xpm2;
    xpm2 = xpm1;
    xpm1 = xp;
    xp *= x;
  }
  const double s = -exp_a_;
  return std::pow(gamma, s - 2.0) *
         (s * (s - 1.0) * H + 2.0 * x * (2.0 * s + 1.0) * H1 + 4.0 * x * x * H2);
}

// ---------------------------------------------------------------------------
// Gauss-Laguerre
// ---------------------------------------------------------------------------

GaussLaguerre::GaussLaguerre(double alpha, int n) {
  require(alpha > -1.0 && n >= 1, "GaussLaguerre: bad parameters");
  std::vector<double> d(n), e(n > 1 ? n - 1 : 0), z;
  for (int i = 0; i < n; ++i) d[i] = 2.0 * i + alpha + 1.0;
  for (int i = 1; i < n; ++i) e[i - 1] = std::sqrt(i * (i + alpha));
  e.resize(n, 0.0);
  symmetric_tridiagonal_eigen(d, e, z);
  x_ = std::move(d);
  w_.resize(n);
  const double mu0 = std::exp(std::lgamma(alpha + 1.0));
  for (int i = 0; i < n; ++i) w_[i] = mu0 * z[i] * z[i];
}

double GaussLaguerre::integrate(const std::function<double(double)>& F) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) acc += w_[i] * F(x_[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// WeightedIP
// ---------------------------------------------------------------------------

WeightedIP::WeightedIP(double a, double b, int nodes, double power_hint)
    : a_(a), b_(b), sigma_(power_hint), gl_((a + power_hint - 1.0) / 2.0, nodes) {
  require(b > 0.0, "WeightedIP: b > 0");
  require(a + power_hint > -1.0, "WeightedIP: divergent weight");
  const double atot = a + power_hint;
  scale_ = std::exp(0.5 * (atot - 1.0) * std::log(2.0) - 0.5 * (atot + 1.0) * std::log(b));
  r_.resize(gl_.nodes().size());
  for (std::size_t i = 0; i < r_.size(); ++i) r_[i] = std::sqrt(2.0 * gl_.nodes()[i] / b);
}

double WeightedIP::ip(const std::function<double(double)>& f,
                      const std::function<double(double)>& g) const {
  double acc = 0.0;
  const auto& w = gl_.weights();
  for (std::size_t i = 0; i < r_.size(); ++i) {
    const double r = r_[i];
    acc += w[i] * f(r) * g(r) * std::pow(r, -sigma_);
  }
  return scale_ * acc;
}

double WeightedIP::norm(const std::function<double(double)>& f) const {
  return std::sqrt(std::max(0.0, ip(f, f)));
}

double WeightedIP::ip_samples(std::span<const double> fg) const {
  double acc = 0.0;
  const auto& w = gl_.weights();
  for (std::size_t i = 0; i < r_.size(); ++i)
    acc += w[i] * fg[i] * std::pow(r_[i], -sigma_);
  return scale_ * acc;
}

HardyCheck hardy_constants_check(const std::function<double(double)>& u,
                                 const std::function<double(double)>& u_r, double a, double b) {
  auto ratios = [&](int nodes) {
    WeightedIP ip(a, b, nodes);
    const double un2 = ip.ip(u, u);
    const double ur2 = ip.ip(u_r, u_r);
    const double h1 = std::sqrt(un2 + ur2);
    auto ru = [&](double r) { return r * u(r); };
    auto du = [&](double r) { return u(r) / r; };
    const double mult = std::sqrt(std::max(0.0, ip.ip(ru, ru))) / h1;
    const double div = std::sqrt(std::max(0.0, ip.ip(du, du))) / h1;
    return std::pair<double, double>(mult, div);
  };
  const auto [m64, d64] = ratios(64);
  const auto [m256, d256] = ratios(256);
  const auto [m1024, d1024] = ratios(1024);
  HardyCheck out;
  out.ratio_mult = m1024;
  out.ratio_div = d1024;
  (void)m64;
  (void)m256;
  // a log-divergent ||u/r|| keeps growing as the smallest node approaches 0
  out.divergent = (d1024 > d256 * 1.01) && (d256 > d64 * 1.01);
  return out;
}

// ---------------------------------------------------------------------------
// Bessel I
// ---------------------------------------------------------------------------

namespace {
double bessel_i_series(double nu, double x) {
  if (x == 0.0) return (nu == 0.0) ? 1.0 : 0.0;
  const double q = 0.25 * x * x;
  double term = std::exp(nu * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int m = 0; m < 4000; ++m) {
    term *= q / ((m + 1.0) * (nu + m + 1.0));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double bessel_i_asymptotic_scaled(double nu, double x) {
  // e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_m (-1)^m a_m(nu) / x^m, optimally truncated
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0, prev = std::abs(term);
  for (int m = 0; m < 60; ++m) {
    const double f = (mu - (2.0 * m + 1.0) * (2.0 * m + 1.0)) / (8.0 * (m + 1.0) * x);
    term *= -f;
    if (std::abs(term) > prev) break;  // divergence onset
    prev = std::abs(term);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * M_PI * x);
}
}  // namespace

double bessel_i(double nu, double x) {
  require(nu >= 0.0 && x >= 0.0, "bessel_i: nu, x >= 0");
  const double x_switch = std::max(14.0, 2.0 * nu * nu);
  if (x < x_switch) {
    require(x < 650.0, "bessel_i: series overflow range");
    return bessel_i_series(nu, x);
  }
  return bessel_i_asymptotic_scaled(nu, x) * std::exp(x);
}

double bessel_i_scaled(double nu, double x) {
  require(nu >= 0.0 && x >= 0.0, "bessel_i_scaled: nu, x >= 0");
  const double x_switch = std::max(14.0, 2.0 * nu * nu);
  if (x < x_switch) {
    require(x < 650.0, "bessel_i_scaled: series overflow range");
    return bessel_i_series(nu, x) * std::exp(-x);
  }
  return bessel_i_asymptotic_scaled(nu, x);
}

// ---------------------------------------------------------------------------
// exp_tail
// ---------------------------------------------------------------------------

ExpTail exp_tail(double R, double kappa, double b) {
  require(R > 0.0 && b > 0.0, "exp_tail: R, b > 0");
  // substitute v = b (r^2 - R^2)/2:  F = e^{-bR^2/2}/b int_0^inf (R^2 + 2v/b)^{(kappa-1)/2} e^{-v} dv
  static thread_local std::unique_ptr<GaussLaguerre> gl;
  if (!gl) gl = std::make_unique<GaussLaguerre>(0.0, 160);
  const double I = gl->integrate(
      [&](double v) { return std::pow(R * R + 2.0 * v / b, 0.5 * (kappa - 1.0)); });
  ExpTail out;
  out.value = std::exp(-0.5 * b * R * R) / b * I;
  out.leading_ratio = I / std::pow(R, kappa - 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Resolvent BVP (log-gamma grid, 2nd-order central, tridiagonal)
// ---------------------------------------------------------------------------

ResolventTable resolvent_z_lambda(const Spectrum& spec, int k, double gmin, double gmax,
                                  int n_points) {
  const ConeParams& c = spec.cone();
  const double n = c.n, B2 = c.B2(), p = c.p;
  const double B2l = spec.B2_lambda(k);
  // eigenvalue collision check: B^2 lam_k in {-1, -2, ...}
  const double nearest = std::round(B2l);
  if (nearest <= -1.0 && std::abs(B2l - nearest) < 1e-9)
    throw std::domain_error("resolvent_z_lambda: resonant mode (lambda_k in spec(D_Z))");
  const double lam = B2l / B2;
  const double ea = spec.exp_a();

  const int N = n_points;
  const double y0 = std::log(gmin), y1 = std::log(gmax);
  const double h = (y1 - y0) / (N - 1);
  std::vector<double> sub(N - 1), diag(N), sup(N - 1), rhs(N), gamma(N);
  for (int i = 0; i < N; ++i) gamma[i] = std::exp(y0 + i * h);

  // -W_yy + (3 - n + g^2/2B^2) W_y + (lam g^2 + 2(n-1)) W = -4 p B^2 g U_k'(g)
  auto C1 = [&](double g) { return 3.0 - n + g * g / (2.0 * B2); };
  auto C0 = [&](double g) { return lam * g * g + 2.0 * (n - 1.0); };
  auto R = [&](double g) { return -4.0 * p * B2 * g * spec.eigenfunction_u_d1(k, g); };

  const double ih2 = 1.0 / (h * h);
  for (int i = 0; i < N; ++i) {
    const double g = gamma[i];
    diag[i] = 2.0 * ih2 + C0(g);
    rhs[i] = R(g);
    if (i > 0) sub[i - 1] = -ih2 - C1(g) / (2.0 * h);
    if (i < N - 1) sup[i] = -ih2 + C1(g) / (2.0 * h);
  }
  // Robin closures by ghost elimination:
  //   at gmin:  W_y = -ea W          (power law g^{-ea})
  //   at gmax:  W_y = (-2 B^2 lam - 2) W
  {
    const double g = gamma[0];
    const double a_impl = -ih2 - C1(g) / (2.0 * h);      // ghost coefficient
    // ghost W_{-1} = W_1 + 2h ea W_0
    diag[0] += a_impl * (2.0 * h * ea);
    sup[0] += a_impl;
  }
  {
    const double g = gamma[N - 1];
    const double m_out = -2.0 * B2l - 2.0;
    const double c_impl = -ih2 + C1(g) / (2.0 * h);
    // ghost W_N = W_{N-2} + 2h m_out W_{N-1}
    diag[N - 1] += c_impl * (2.0 * h * m_out);
    sub[N - 2] += c_impl;
  }
  std::vector<double> W = rhs;
  solve_tridiagonal(sub, diag, sup, W);

  ResolventTable out;
  out.gamma = gamma;
  out.Z = std::move(W);
  auto at = [&](double g) {
    return interp_cubic(out.gamma, out.Z, g);
  };
  const double g_lo = 2.0 * gmin, g_hi = 0.8 * gmax;
  out.c_prime_fit = at(g_lo) * std::pow(g_lo, ea);
  out.c_doubleprime_fit = at(g_hi) * std::pow(g_hi, 2.0 * B2l + 2.0);
  // two-point extraction removes the O(1/gamma^2) subleading term
  {
    const double g1 = 0.7 * gmax, g2 = 0.8 * gmax;
    const double x1 = g1 * g1 / (4.0 * B2), x2 = g2 * g2 / (4.0 * B2);
    const double C1 = at(g1) * std::pow(g1, 2.0 * B2l);
    const double C2 = at(g2) * std::pow(g2, 2.0 * B2l);
    out.homogeneous_fit = (C2 * x2 - C1 * x1) / (x2 - x1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semigroup
// ---------------------------------------------------------------------------

SemigroupResult semigroup_apply(const Spectrum& spec, const std::function<double(double)>& f,
                                double dtau, Operator which, SemigroupMethod method,
                                std::span<const double> gammas, int n_modes, int quad_nodes,
                                double f_power_hint) {
  const ConeParams& c = spec.cone();
  const double B2 = c.B2();
  const double n = c.n;
  SemigroupResult out;
  out.values.assign(gammas.size(), 0.0);

  if (dtau == 0.0) {
    for (std::size_t i = 0; i < gammas.size(); ++i) out.values[i] = f(gammas[i]);
    return out;
  }
  require(dtau > 0.0, "semigroup_apply: dtau >= 0");

  if (method == SemigroupMethod::eigen_truncation) {
    const bool isU = (which == Operator::U);
    const double a_w = isU ? n : n - 2.0;
    const double hint = (isU ? -spec.exp_a() : 2.0) + f_power_hint;
    WeightedIP ipm(a_w, 1.0 / (2.0 * B2), quad_nodes, hint);
    WeightedIP ip0(a_w, 1.0 / (2.0 * B2), quad_nodes, 2.0 * f_power_hint);
    double energy = ip0.ip(f, f);
    double kept = 0.0;
    for (int j = 0; j < n_modes; ++j) {
      auto ej = [&](double g) {
        return isU ? spec.eigenfunction_u(j, g) : spec.eigenfunction_z(j, g);
      };
      const double aj = ipm.ip(f, ej);
      kept += aj * aj;
      const double decay = std::exp((isU ? spec.B2_lambda(j) : spec.B2_h(j)) * dtau);
      for (std::size_t i = 0; i < gammas.size(); ++i)
        out.values[i] += decay * aj * ej(gammas[i]);
    }
    out.tail_energy = energy - kept;
    return out;
  }

  // kernel method
  const double E = std::exp(-dtau);
  const double sqE = std::exp(-0.5 * dtau);
  const double one_mE = 1.0 - E;
  const double nu = (which == Operator::U) ? spec.laguerre_alpha() : (n + 1.0) / 2.0;
  const double pow_out = (which == Operator::U) ? (1.0 - n) / 2.0 : (3.0 - n) / 2.0;
  const double pow_in = (which == Operator::U) ? (n + 1.0) / 2.0 : (n - 1.0) / 2.0;

  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const double g = gammas[i];
    const double center = sqE * g;
    const double width = std::sqrt(2.0 * B2 * one_mE);
    const double lo = std::max(1e-12, center - 14.0 * width);
    const double hi = std::max(center + 14.0 * width, 45.0);
    auto integrand = [&](double gb) {
      const double arg = g * gb * sqE / (2.0 * B2 * one_mE);
      const double gau = std::exp(-(center - gb) * (center - gb) / (4.0 * B2 * one_mE));
      return bessel_i_scaled(nu, arg) * gau * f(gb) * std::pow(gb, pow_in);
    };
    // panels aligned with the Gaussian factor so the peak is always sampled
    std::vector<double> edges;
    edges.push_back(lo);
    for (int j = -14; j <= 14; ++j) {
      const double e = center + 2.0 * width * j;
      if (e > lo && e < hi) edges.push_back(e);
    }
    edges.push_back(hi);
    double scale = 0.0;
    for (double e : edges) scale = std::max(scale, std::abs(integrand(e)));
    for (std::size_t m = 0; m + 1 < edges.size(); ++m)
      scale = std::max(scale, std::abs(integrand(0.5 * (edges[m] + edges[m + 1]))));
    const double floor = 1e-14 * scale * width + 1e-290;
    double I = 0.0;
    for (std::size_t m = 0; m + 1 < edges.size(); ++m)
      I += integrate_adaptive(integrand, edges[m], edges[m + 1], 1e-11, floor);
    out.values[i] = (1.0 / (2.0 * B2)) * std::pow(g * sqE, pow_out) / one_mE * I;
  }
  return out;
}

}  // namespace warpflow
