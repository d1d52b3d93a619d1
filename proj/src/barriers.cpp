#include "warpflow/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace warpflow {

void RegionParams::validate() const {
  require(Upsilon_bar > 1.0 && Upsilon_bar <= Upsilon_U && Upsilon_U <= Upsilon_Z,
          "RegionParams: need 1 << Upsilon_bar <= Upsilon_U <= Upsilon_Z");
  require(beta > 0.0 && beta < beta_bar && beta_bar < 0.5,
          "RegionParams: need 0 < beta < beta_bar < 1/2");
  require(tau1 > tau0, "RegionParams: tau1 > tau0");
}

RegionParams RegionParams::reference(const Spectrum& spec, int k) {
  RegionParams r;
  r.Upsilon_U = 1e3;
  r.Upsilon_Z = 1e5;
  r.Upsilon_bar = 50.0;
  r.M = 1.0;
  r.alpha = spec.alpha_k(k);
  r.beta = 0.4;
  r.beta_bar = 0.45;
  r.tau0 = 40.0;
  r.tau1 = 45.0;
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// constants_to_use
// ---------------------------------------------------------------------------

namespace {

struct ConstraintEval {
  bool ok = true;
  std::string failed;
};

ConstraintEval check_constraints(int p, int q, const BarrierConstants& bc, double exp_a,
                                 double two_alpha) {
  const double n = p + q;
  auto fail = [](const char* what) { return ConstraintEval{false, what}; };
  if (!(bc.a * bc.a - (q - 1.0) * bc.a + 2.0 * (q - 1.0) < 0.0))
    return fail("a^2 - (q-1)a + 2(q-1) < 0");
  if (!(0.0 < bc.b && bc.b < bc.a)) return fail("0 < b < a");
  if (!(bc.b < 2.0 * std::sqrt(double(q)) + 2.0)) return fail("b < 2 sqrt(q) + 2");
  if (!(bc.b * bc.b - (n - 3.0) * bc.b - 2.0 * (n - 1.0) < 0.0))
    return fail("b^2 - (n-3)b - 2(n-1) < 0");
  if (!(0.5 * bc.b * bc.b + 2.0 * bc.b - 2.0 * (q - 1.0) < 0.0))
    return fail("b^2/2 + 2b - 2(q-1) < 0");
  if (!(0.0 < bc.eps && bc.eps < exp_a / bc.a)) return fail("0 < eps < exp_a/a");
  if (!(0.0 < bc.kappa && bc.kappa < two_alpha)) return fail("0 < kappa < sqrt((n-9)(n-1))");
  if (!(bc.kappa < bc.c && bc.c < bc.kappa + exp_a)) return fail("c in (kappa, kappa + exp_a)");
  if (!(1.0 + bc.eps / bc.b < exp_a / bc.a + bc.c / (exp_a + bc.kappa)))
    return fail("1 + eps/b < exp_a/a + c/(exp_a + kappa)");
  if (!(0.0 < bc.l && bc.l < 0.5 * exp_a)) return fail("0 < l < exp_a/2");
  return {};
}

}  // namespace

BarrierConstants constants_to_use(int p, int q, int k) {
  require(q >= 10, "constants_to_use: requires q >= 10");
  const ConeParams cone = cone_constants(p, q);
  const Spectrum spec(cone);
  (void)k;  // exp_a is k-free; kept in the signature for the call sites
  const double exp_a = spec.exp_a();
  const double two_alpha = 2.0 * spec.laguerre_alpha();
  const double a0 = (q - 1.0) / 2.0 - 0.5 * std::sqrt((q - 9.0) * (q - 1.0));

  // base point: a at the lower root, c = kappa = exp_a/2, b = exp_a; then
  // nudge a up and (c, kappa) down by a halved delta until everything holds
  double delta = 0.25 * exp_a;
  for (int it = 0; it < 60; ++it, delta *= 0.5) {
    BarrierConstants bc;
    bc.a = a0 + delta;
    bc.b = exp_a;
    bc.kappa = 0.5 * exp_a - delta;
    bc.c = 0.5 * exp_a - 0.5 * delta;  // keeps c > kappa by delta/2
    bc.l = 0.25 * exp_a;
    // and eps small against both of its constraints
    const double head = exp_a / bc.a + bc.c / (exp_a + bc.kappa) - 1.0;
    bc.eps = 0.25 * bc.b * std::max(head, 0.0);
    bc.eps = std::min(bc.eps, 0.5 * exp_a / bc.a);
    if (bc.eps <= 0.0) continue;
    const auto ce = check_constraints(p, q, bc, exp_a, two_alpha);
    if (ce.ok) return bc;
    if (it == 59) throw std::domain_error("constants_to_use: infeasible, failing: " + ce.failed);
  }
  throw std::domain_error("constants_to_use: infeasible constraint set");
}

// ---------------------------------------------------------------------------
// operator assemblers and the report sampler
// ---------------------------------------------------------------------------

double op_rescaled_u(const ConeParams& cone, const Candidate& cand, double Zval, double g,
                     double tau) {
  const double q = cone.q, p = cone.p;
  const double v = cand.val(g, tau), v1 = cand.d1(g, tau), v2 = cand.d2(g, tau);
  return Zval * v2 + (Zval + q - 1.0) * v1 / g - (p - 1.0) * std::exp(-2.0 * v) -
         0.5 * g * v1 + 0.5 - cand.dtau(g, tau);
}

double op_rescaled_z(const ConeParams& cone, const Candidate& cand, double Ugrad, double g,
                     double tau) {
  const double q = cone.q, p = cone.p;
  const double v = cand.val(g, tau), v1 = cand.d1(g, tau), v2 = cand.d2(g, tau);
  return v * v2 + v1 * ((q - 1.0) / g - v / g) - 0.5 * v1 * v1 +
         2.0 * (q - 1.0) / (g * g) * v * (1.0 - v) - 2.0 * p * v * v * Ugrad * Ugrad -
         0.5 * g * v1 - cand.dtau(g, tau);
}

namespace {

// residual statistics over a log-uniform x / uniform tau sample grid;
// `dominant` sets the tolerance scale at each point
BarrierReport sample_report(std::string lemma, int required_sign, const SampleGrid& g,
                            const std::function<double(double, double)>& residual,
                            const std::function<double(double, double)>& dominant) {
  BarrierReport rep;
  rep.lemma = std::move(lemma);
  rep.required_sign = required_sign;
  rep.n_space = g.n_space;
  rep.n_tau = g.n_tau;
  rep.min_residual = std::numeric_limits<double>::infinity();
  rep.max_residual = -rep.min_residual;
  long violations = 0, total = 0;
  const double lx0 = std::log(g.x_lo), lx1 = std::log(g.x_hi);
  for (int i = 0; i < g.n_space; ++i) {
    const double x = std::exp(lx0 + (lx1 - lx0) * (g.n_space == 1 ? 0.0 : double(i) / (g.n_space - 1)));
    for (int j = 0; j < g.n_tau; ++j) {
      const double tau =
          g.tau_lo + (g.tau_hi - g.tau_lo) * (g.n_tau == 1 ? 0.0 : double(j) / (g.n_tau - 1));
      const double r = residual(x, tau);
      rep.min_residual = std::min(rep.min_residual, r);
      rep.max_residual = std::max(rep.max_residual, r);
      const double tol = 1e-12 * std::abs(dominant(x, tau));
      const bool bad = (required_sign > 0) ? (r < -tol) : (r > tol);
      if (bad) {
        ++violations;
        rep.worst = {x, tau};
      }
      ++total;
    }
  }
  rep.violation_fraction = double(violations) / double(total);
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------
// inner-region cone barriers
// ---------------------------------------------------------------------------

BarrierReport inner_cone_barrier_u(const ConeParams& cone, double c_slope, const SampleGrid& g) {
  require(c_slope >= cone.A / cone.B - 1e-14, "inner_cone_barrier_u: need c >= A/B");
  Candidate cand;
  cand.val = [c_slope](double x, double) { return std::log(c_slope * x); };
  cand.d1 = [](double x, double) { return 1.0 / x; };
  cand.d2 = [](double x, double) { return -1.0 / (x * x); };
  cand.dtau = [](double, double) { return 0.0; };
  auto residual = [&, c_slope, cand](double x, double tau) {
    return op_rescaled_u(cone, cand, cone.B2(), x, tau);  // Z-independent
  };
  auto dominant = [&](double x, double) { return (cone.q - 1.0) / (x * x); };
  auto rep = sample_report("inner cone barrier (U lower)", +1, g, residual, dominant);
  rep.params = {{"c", c_slope}};
  return rep;
}

BarrierReport inner_cone_barrier_z(const ConeParams& cone, double c_level, const SampleGrid& g) {
  require(c_level > 0.0 && c_level <= cone.B2() + 1e-14, "inner_cone_barrier_z: need 0 < c <= B^2");
  Candidate cand;
  cand.val = [c_level](double, double) { return c_level; };
  cand.d1 = [](double, double) { return 0.0; };
  cand.d2 = [](double, double) { return 0.0; };
  cand.dtau = [](double, double) { return 0.0; };
  auto residual = [&, cand](double x, double tau) {
    return op_rescaled_z(cone, cand, 1.0 / x, x, tau);  // adversarial |U_gamma| = 1/gamma
  };
  auto dominant = [&](double x, double) {
    return 2.0 * (cone.q - 1.0) * c_level / (x * x);
  };
  auto rep = sample_report("inner cone barrier (Z lower)", +1, g, residual, dominant);
  rep.params = {{"c", c_level}};
  return rep;
}

BarrierReport inner_grad_barrier_u(const ConeParams& cone, const SampleGrid& g) {
  // candidate 1/gamma for the U_gamma equation; supersolution given
  // U >= log(A gamma / B), taken at the adversarial equality end
  auto residual = [&](double x, double tau) {
    (void)tau;
    const double e2U = cone.B2() / (cone.A2() * x * x);  // e^{-2U} at the cone
    return -2.0 * (cone.q - 1.0) / (x * x * x) + 2.0 * (cone.p - 1.0) * e2U / x;
  };
  auto dominant = [&](double x, double) { return 2.0 * (cone.q - 1.0) / (x * x * x); };
  return sample_report("inner cone barrier (gradient upper)", -1, g, residual, dominant);
}

BarrierReport inner_second_deriv_sign(const ConeParams& cone, const SampleGrid& g) {
  // nonlinear-term sign 4(q-1)U_g/g^3 - 4(p-1)e^{-2U}U_g^2 >= 0 under
  // 0 <= U_g <= 1/g and U >= log(A g/B); minimized over the admissible ends
  auto residual = [&](double x, double tau) {
    (void)tau;
    const double e2U = cone.B2() / (cone.A2() * x * x);
    double worst = std::numeric_limits<double>::infinity();
    for (double u1 : {0.0, 0.5 / x, 1.0 / x}) {
      const double s = 4.0 * (cone.q - 1.0) * u1 / (x * x * x) -
                       4.0 * (cone.p - 1.0) * e2U * u1 * u1;
      worst = std::min(worst, s);
    }
    return worst;
  };
  auto dominant = [&](double x, double) { return 4.0 * (cone.q - 1.0) / (x * x * x * x); };
  return sample_report("inner second-derivative nonlinear sign", +1, g, residual, dominant);
}

// ---------------------------------------------------------------------------
// xi-region barriers (inner-parabolic interface)
// ---------------------------------------------------------------------------

namespace {

// expanded Ztilde equation in the xi variable, residual of a candidate W with
// ambient U_xi = 1/xi + Ut1 and the drift e^{-2 alpha tau}(alpha + 1/2) xi W_xi
double xi_z_equation(const ConeParams& cone, double alpha, double W, double W1, double W2,
                     double Ut1, double xi, double tau) {
  const double q = cone.q, p = cone.p, B2 = cone.B2();
  const double Uxi = 1.0 / xi + Ut1;
  const double Fq = W * W2 - 0.5 * W1 * W1 - W * W1 / xi - 2.0 * (q - 1.0) / (xi * xi) * W * W;
  return B2 * W2 + (q - 1.0 - B2) / xi * W1 - 2.0 * (q - 1.0) / (xi * xi) * W -
         4.0 * p * B2 / (xi * xi) * W - 4.0 * p * B2 * B2 / xi * Ut1 + Fq -
         2.0 * p * W * W * Uxi * Uxi - 2.0 * p * B2 * B2 * Ut1 * Ut1 -
         4.0 * p * B2 * (Uxi * Uxi - 1.0 / (xi * xi)) * W -
         std::exp(-2.0 * alpha * tau) * (alpha + 0.5) * xi * W1;
}

// U-equation residual in xi with ambient Zt >= 0 added to the B^2 part
double xi_u_equation(const ConeParams& cone, double alpha, double W, double W1, double W2,
                     double Zt, double xi, double tau) {
  const double q = cone.q, B2 = cone.B2();
  return (B2 + Zt) * (W2 + W1 / xi) + (q - 1.0) / xi * W1 +
         (q - 1.0) / (xi * xi) * (1.0 - std::exp(-2.0 * W)) -
         std::exp(-2.0 * alpha * tau) * (alpha + 0.5) * xi * W1;
}

}  // namespace

BarrierReport xi_far_barrier_u_weak(const Spectrum& spec, int k, const BarrierConstants& bc,
                                    double C0, double Upsilon, double tau0, const SampleGrid& gin) {
  const ConeParams& cone = spec.cone();
  const double a = bc.a, alpha = spec.alpha_k(k);
  SampleGrid g = gin;
  g.x_hi = Upsilon;
  auto residual = [&](double xi, double tau) {
    const double W = C0 * std::pow(xi, -a);
    const double W1 = -a * W / xi;
    const double W2 = a * (a + 1.0) * W / (xi * xi);
    // adversarial Z = 1: the diffusion coefficient multiplies a^2 W/xi^2 > 0
    return xi_u_equation(cone, alpha, W, W1, W2, 1.0 - cone.B2(), xi, tau);
  };
  auto dominant = [&](double xi, double) {
    return std::abs(a * a - (cone.q - 1.0) * a + 2.0 * (cone.q - 1.0)) * C0 *
           std::pow(xi, -a - 2.0);
  };
  auto rep = sample_report("inner-far barrier (U weak upper)", -1, g, residual, dominant);
  rep.params = {{"a", a}, {"C0", C0}, {"Upsilon", Upsilon}, {"tau0", tau0}};
  rep.coefficient_checks["a^2-(q-1)a+2(q-1)"] =
      a * a - (cone.q - 1.0) * a + 2.0 * (cone.q - 1.0);
  rep.coefficients_ok = rep.coefficient_checks["a^2-(q-1)a+2(q-1)"] < 0.0;
  return rep;
}

BarrierReport xi_far_barrier_z(const Spectrum& spec, int k, const BarrierConstants& bc, double C0,
                               double D0, double M_int, double Upsilon, double tau0,
                               const SampleGrid& gin) {
  const ConeParams& cone = spec.cone();
  const double n = cone.n, q = cone.q, p = cone.p, B2 = cone.B2();
  const double a = bc.a, b = bc.b, eps = bc.eps, ea = spec.exp_a();
  const double alpha = spec.alpha_k(k);
  const double C0p = C0 * std::pow(Upsilon, a - ea);
  const double D0p = D0 * std::pow(Upsilon, (b / a) * (a - ea) + eps);
  // below Xi the bound is the trivial Zt <= 1 - B^2
  const double Xi = std::pow(D0p / (1.0 - B2), 1.0 / b);
  SampleGrid g = gin;
  g.x_lo = std::max(gin.x_lo, Xi);
  g.x_hi = Upsilon;
  auto residual = [&](double xi, double tau) {
    const double W = D0p * std::pow(xi, -b);
    const double W1 = -b * W / xi;
    const double W2 = b * (b + 1.0) * W / (xi * xi);
    // adversarial ambient: |Ut_xi| <= M C0' xi^{-a-1}
    const double bnd = M_int * C0p * std::pow(xi, -a - 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (double Ut1 : {-bnd, 0.0, bnd})
      worst = std::max(worst, xi_z_equation(cone, alpha, W, W1, W2, Ut1, xi, tau));
    return worst;
  };
  auto dominant = [&](double xi, double) {
    return std::abs(B2 * (b * b - (n - 3.0) * b - 2.0 * (n - 1.0))) * D0p *
           std::pow(xi, -b - 2.0);
  };
  auto rep = sample_report("inner-far barrier (Z upper)", -1, g, residual, dominant);
  rep.params = {{"a", a}, {"b", b},       {"eps", eps},         {"C0", C0},
                {"D0", D0}, {"M", M_int}, {"Upsilon", Upsilon}, {"tau0", tau0},
                {"Xi", Xi}};
  rep.coefficient_checks["b^2-(n-3)b-2(n-1)"] = b * b - (n - 3.0) * b - 2.0 * (n - 1.0);
  rep.coefficient_checks["b^2/2+2b-2(q-1)"] = 0.5 * b * b + 2.0 * b - 2.0 * (q - 1.0);
  rep.coefficients_ok = rep.coefficient_checks["b^2-(n-3)b-2(n-1)"] < 0.0 &&
                        rep.coefficient_checks["b^2/2+2b-2(q-1)"] < 0.0;
  (void)p;
  return rep;
}

BarrierReport xi_far_barrier_u(const Spectrum& spec, int k, const BarrierConstants& bc, double C1,
                               double D0, double U_bar, double Upsilon, double tau0,
                               const SampleGrid& gin) {
  const ConeParams& cone = spec.cone();
  const double n = cone.n, B2 = cone.B2();
  const double a = bc.a, b = bc.b, c = bc.c, kappa = bc.kappa, eps = bc.eps;
  const double ea = spec.exp_a();
  const double alpha = spec.alpha_k(k);
  const double m = ea + kappa;  // decay power of the candidate
  const double C1p = C1 * std::pow(Upsilon, c);
  const double D0p = D0 * std::pow(Upsilon, (b / a) * (a - ea) + eps);
  // Xi: smallest solution of log(xi) + C1' xi^{-m} = C_Upsilon
  const double C_Ups = U_bar * std::pow(Upsilon, -ea) + std::log(Upsilon);
  const double xi_star = std::pow(m * C1p, 1.0 / m);  // argmin of f
  double Xi = xi_star;
  {
    auto f = [&](double xi) { return std::log(xi) + C1p * std::pow(xi, -m) - C_Ups; };
    if (f(xi_star) < 0.0) Xi = bisect(f, 1e-8 * xi_star, xi_star, 1e-12);
  }
  SampleGrid g = gin;
  g.x_lo = std::max(gin.x_lo, Xi);
  g.x_hi = Upsilon;
  auto residual = [&](double xi, double tau) {
    const double W = C1p * std::pow(xi, -m);
    const double W1 = -m * W / xi;
    const double W2 = m * (m + 1.0) * W / (xi * xi);
    const double Zt = D0p * std::pow(xi, -b);  // adversarial upper ambient
    return xi_u_equation(cone, alpha, W, W1, W2, Zt, xi, tau);
  };
  auto dominant = [&](double xi, double) {
    return std::abs(B2 * (m * m - (n - 1.0) * m + 2.0 * (n - 1.0))) * C1p *
           std::pow(xi, -m - 2.0);
  };
  auto rep = sample_report("inner-far barrier (U upper)", -1, g, residual, dominant);
  rep.params = {{"a", a},     {"b", b},   {"c", c},           {"kappa", kappa},
                {"eps", eps}, {"C1", C1}, {"D0", D0},         {"U_bar", U_bar},
                {"Xi", Xi},   {"tau0", tau0}, {"Upsilon", Upsilon}};
  // first coefficient and the Xi window log Xi / log Upsilon in (0, c/(ea+kappa))
  rep.coefficient_checks["m^2-(n-1)m+2(n-1)"] = m * m - (n - 1.0) * m + 2.0 * (n - 1.0);
  const double win = std::log(Xi) / std::log(Upsilon);
  rep.coefficient_checks["logXi/logUps"] = win;
  rep.coefficient_checks["c/(ea+kappa)"] = c / m;
  rep.coefficients_ok = rep.coefficient_checks["m^2-(n-1)m+2(n-1)"] < 0.0 && win > 0.0 &&
                        win < c / m * (1.0 + 1e-9);
  return rep;
}

BarrierReport inner_parab_extend_z(const Spectrum& spec, int k, double C_u, double eta_u,
                                   double D_minus, double D_plus, double Upsilon_U,
                                   double Upsilon_Z, double tau0, const SampleGrid& gin) {
  require(eta_u > 0.0 && eta_u < -C_u, "inner_parab_extend_z: need 0 < eta < -C");
  const ConeParams& cone = spec.cone();
  const double n = cone.n, p = cone.p, B2 = cone.B2();
  const double ea = spec.exp_a();
  const double alpha = spec.alpha_k(k);
  const double quad = ea * ea - (n - 3.0) * ea - 2.0 * (n - 1.0);
  const double mid_lo = 4.0 * p * B2 * (C_u + eta_u) / quad;
  const double mid_hi = 4.0 * p * B2 * (C_u - eta_u) / quad;
  SampleGrid g = gin;
  g.x_lo = Upsilon_U;
  g.x_hi = Upsilon_Z;
  auto make_residual = [&](double D, int sign) {
    return [&, D, sign](double xi, double tau) {
      const double W = D * std::pow(xi, -ea);
      const double W1 = -ea * W / xi;
      const double W2 = ea * (ea + 1.0) * W / (xi * xi);
      double worst = sign > 0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
      for (double cu : {C_u - eta_u, C_u + eta_u}) {
        const double Ut1 = cu * std::pow(xi, -ea - 1.0);
        const double r = xi_z_equation(cone, alpha, W, W1, W2, Ut1, xi, tau);
        worst = sign > 0 ? std::min(worst, r) : std::max(worst, r);
      }
      return worst;
    };
  };
  auto dominant = [&](double xi, double) {
    return std::abs(B2 * quad) * std::max(std::abs(D_minus), D_plus) * std::pow(xi, -ea - 2.0);
  };
  auto rep_lo = sample_report("inner-parabolic extension (Z lower)", +1, g,
                              make_residual(D_minus, +1), dominant);
  auto rep_hi = sample_report("inner-parabolic extension (Z upper)", -1, g,
                              make_residual(D_plus, -1), dominant);
  BarrierReport rep = rep_lo;
  rep.lemma = "inner-parabolic extension (Z two-sided)";
  rep.min_residual = rep_lo.min_residual;
  rep.max_residual = rep_hi.max_residual;
  rep.violation_fraction = 0.5 * (rep_lo.violation_fraction + rep_hi.violation_fraction);
  if (rep_hi.violation_fraction > 0.0) rep.worst = rep_hi.worst;
  rep.params = {{"C", C_u},          {"eta", eta_u},        {"D_minus", D_minus},
                {"D_plus", D_plus},  {"Upsilon_U", Upsilon_U}, {"Upsilon_Z", Upsilon_Z},
                {"tau0", tau0}};
  rep.coefficient_checks["D_window_lo"] = mid_lo;
  rep.coefficient_checks["D_window_hi"] = mid_hi;
  rep.coefficients_ok = (D_minus < std::min(mid_lo, mid_hi)) &&
                        (std::max(mid_lo, mid_hi) < D_plus);
  return rep;
}

// ---------------------------------------------------------------------------
// parabolic-outer interface barriers
// ---------------------------------------------------------------------------

BarrierReport parab_outer_barrier(const Spectrum& spec, int k, ParabOuterKind kind, double C,
                                  double D, double C_U, double Gamma, double rho, double eps_z,
                                  double tau0, const SampleGrid& gin) {
  const ConeParams& cone = spec.cone();
  const double q = cone.q, p = cone.p, B2 = cone.B2();
  const double h = spec.B2_lambda(k);
  require(h < 0.0, "parab_outer_barrier: needs a decaying mode (B^2 lambda_k < 0)");
  const double ke = -2.0 * h;
  const double beta =
      (kind == ParabOuterKind::Z_lower) ? 0.5 / (1.0 + 1.0 / ke) : 0.5;

  const bool is_u = (kind == ParabOuterKind::U_lower || kind == ParabOuterKind::U_upper);
  const int sign = (kind == ParabOuterKind::U_lower || kind == ParabOuterKind::Z_lower) ? +1 : -1;
  const double corr_pow = is_u ? ke - 2.0 : ke - 1.0;

  auto cand_val = [&](double g, double tau) {
    return (C * std::pow(g, ke) + D * std::pow(g, corr_pow)) * std::exp(h * tau);
  };
  auto cand_d1 = [&](double g, double tau) {
    return (C * ke * std::pow(g, ke - 1.0) + D * corr_pow * std::pow(g, corr_pow - 1.0)) *
           std::exp(h * tau);
  };
  auto cand_d2 = [&](double g, double tau) {
    return (C * ke * (ke - 1.0) * std::pow(g, ke - 2.0) +
            D * corr_pow * (corr_pow - 1.0) * std::pow(g, corr_pow - 2.0)) *
           std::exp(h * tau);
  };
  auto cand_dtau = [&](double g, double tau) { return h * cand_val(g, tau); };

  auto residual_u = [&](double g, double tau) {
    const double W = cand_val(g, tau), W1 = cand_d1(g, tau), W2 = cand_d2(g, tau);
    double worst = sign > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    for (double Z : {eps_z, 1.0}) {
      const double r = Z * (W2 + W1 / g) + ((q - 1.0) / g - 0.5 * g) * W1 +
                       (q - 1.0) / (g * g) * (1.0 - std::exp(-2.0 * W)) - cand_dtau(g, tau);
      worst = sign > 0 ? std::min(worst, r) : std::max(worst, r);
    }
    return worst;
  };
  auto residual_z = [&](double g, double tau) {
    const double W = cand_val(g, tau), W1 = cand_d1(g, tau), W2 = cand_d2(g, tau);
    const double ubnd = C_U * std::pow(g, ke) * std::exp(h * tau);
    double worst = sign > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    for (double Z : {eps_z, 1.0}) {
      for (double Ug : {-ubnd, ubnd}) {
        double r;
        if (kind == ParabOuterKind::Z_upper) {
          r = Z * (W2 - W1 / g) + W1 * ((q - 1.0) / g - 0.5 * g) +
              2.0 * (q - 1.0) / (g * g) * W * (1.0 - Z) -
              2.0 * p *
                  (2.0 * B2 * B2 * Ug / g + 2.0 * B2 * W * (1.0 / (g * g) + 2.0 * Ug / g) +
                   W * W * (1.0 / (g * g) + 2.0 * Ug / g)) -
              cand_dtau(g, tau);
        } else {
          // lower: the bounding right-hand side of the proof
          r = Z * (W2 - W1 / g) + W1 * ((q - 1.0) / g - 0.5 * g) - 0.5 * W1 * W1 +
              2.0 * (q - 1.0) / (g * g) * W * (1.0 - Z) -
              2.0 * p *
                  (2.0 * B2 * B2 * C_U * std::pow(g, ke - 1.0) * std::exp(h * tau) +
                   B2 * B2 * C_U * C_U * std::pow(g, 2.0 * ke) * std::exp(2.0 * h * tau) +
                   (2.0 * B2 * W + W * W) * (1.0 / (g * g) + 2.0 * Ug / g + Ug * Ug)) -
              cand_dtau(g, tau);
        }
        worst = sign > 0 ? std::min(worst, r) : std::max(worst, r);
      }
    }
    return worst;
  };

  SampleGrid g = gin;
  g.x_lo = Gamma;
  g.x_hi = rho * std::exp(beta * g.tau_lo);  // narrowest extent of the moving window
  auto residual = [&](double x, double tau) {
    if (x > rho * std::exp(beta * tau)) return sign > 0 ? 1.0 : -1.0;  // off-domain: neutral
    return is_u ? residual_u(x, tau) : residual_z(x, tau);
  };
  auto dominant = [&](double x, double tau) {
    return (std::abs(C) + std::abs(D)) * (1.0 + 0.5 * ke) * std::pow(x, ke) *
           std::exp(h * tau);
  };
  const char* names[] = {"parabolic-outer barrier (U lower)", "parabolic-outer barrier (U upper)",
                         "parabolic-outer barrier (Z upper)", "parabolic-outer barrier (Z lower)"};
  auto rep = sample_report(names[int(kind)], sign, g, residual, dominant);
  rep.params = {{"C", C},       {"D", D},     {"C_U", C_U}, {"Gamma", Gamma},
                {"rho", rho},   {"eps", eps_z}, {"beta", beta}, {"tau0", tau0},
                {"k", double(k)}};
  switch (kind) {
    case ParabOuterKind::U_lower:
      rep.coefficient_checks["-|C|k^2-(q-1)|C|k+D-2(q-1)|C|"] =
          -std::abs(C) * ke * ke - (q - 1.0) * std::abs(C) * ke + D -
          2.0 * (q - 1.0) * std::abs(C);
      rep.coefficients_ok = rep.coefficient_checks.begin()->second > 0.0;
      break;
    case ParabOuterKind::U_upper:
      // 1 - e^{-2U} - 2U <= 0 makes the upper barrier unconditional in rho
      rep.coefficient_checks["concavity"] = -1.0;
      break;
    case ParabOuterKind::Z_upper:
      rep.coefficient_checks["D/2+4pB^4C_U"] = 0.5 * D + 4.0 * p * B2 * B2 * C_U;
      rep.coefficients_ok = (D < 0.0) && (rep.coefficient_checks["D/2+4pB^4C_U"] < 0.0);
      break;
    case ParabOuterKind::Z_lower:
      rep.coefficient_checks["D/2+4pB^4C_U"] = 0.5 * D + 4.0 * p * B2 * B2 * C_U;
      rep.coefficients_ok = rep.coefficient_checks["D/2+4pB^4C_U"] > 0.0;
      break;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// outer sine-cone barrier
// ---------------------------------------------------------------------------

SineConeBarrier sine_cone_barrier(const ConeParams& cone, double C, double K0, double t,
                                  const std::vector<double>& psi_grid) {
  require(K0 > 0.0, "sine_cone_barrier: K0 > 0");
  const double q = cone.q, p = cone.p;
  const double denom = 1.0 - K0 * (C * C * p + q) * t;
  require(denom > 0.0, "sine_cone_barrier: t past the pole of K");
  SineConeBarrier out;
  out.K_t = K0 / denom;
  const double z0 = (q - 1.0) / (q - 1.0 + p * C * C);
  out.psi = psi_grid;
  out.z_minus.resize(psi_grid.size());
  for (std::size_t i = 0; i < psi_grid.size(); ++i)
    out.z_minus[i] = std::max(0.0, z0 - 0.5 * out.K_t * psi_grid[i] * psi_grid[i]);
  out.psi_star = std::sqrt(2.0 * z0 / out.K_t);
  return out;
}

double sine_cone_barrier_equality_defect(const ConeParams& cone, double C, double K0, double t,
                                         const std::vector<double>& psi_grid) {
  const double q = cone.q, p = cone.p;
  const double denom = 1.0 - K0 * (C * C * p + q) * t;
  require(denom > 0.0, "sine_cone_barrier_equality_defect: t past the pole of K");
  const double K = K0 / denom;
  const double Kdot = K * K * (C * C * p + q);
  const double z0 = (q - 1.0) / (q - 1.0 + p * C * C);
  double worst = 0.0;
  for (double psi : psi_grid) {
    if (psi <= 0.0) continue;
    const double z = z0 - 0.5 * K * psi * psi;
    if (z <= 0.0) continue;  // positive branch only
    const double z1 = -K * psi, z2 = -K;
    // F^l + F^q - 2 p C^2 z^2/psi^2 against dz/dt
    const double F = z * z2 + z1 * ((q - 1.0) / psi - z / psi) - 0.5 * z1 * z1 +
                     2.0 * (q - 1.0) / (psi * psi) * z * (1.0 - z) -
                     2.0 * p * C * C * z * z / (psi * psi);
    const double zt = -0.5 * Kdot * psi * psi;
    worst = std::max(worst, std::abs(F - zt));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// membership
// ---------------------------------------------------------------------------

namespace {

struct FieldDerivs {
  GridDerivative d;
  std::vector<double> Z1, Z2, U1, U2;
  explicit FieldDerivs(const PerturbationFields& f) : d(f.gamma) {
    Z1 = d.deriv_all(f.Ztilde, 1);
    Z2 = d.deriv_all(f.Ztilde, 2);
    U1 = d.deriv_all(f.Utilde, 1);
    U2 = d.deriv_all(f.Utilde, 2);
  }
};

void update(MembershipItem& item, double violation, double slack, double g, double tau) {
  if (violation > item.max_violation) {
    item.max_violation = violation;
    item.worst = {g, tau};
    item.pass = false;
  }
  item.margin = std::min(item.margin, slack);
}

MembershipItem make_item(const std::string& name) {
  MembershipItem it;
  it.name = name;
  it.margin = std::numeric_limits<double>::infinity();
  return it;
}

}  // namespace

MembershipReport membership_check(const std::vector<PerturbationFields>& samples,
                                  const Spectrum& spec, int k, const RegionParams& region,
                                  RegionSet which,
                                  const std::function<double(double, double)>& rm_field) {
  const ConeParams& cone = spec.cone();
  const double B2 = cone.B2();
  const double ea = spec.exp_a();
  const double B2l = spec.B2_lambda(k);
  const double alpha = region.alpha;
  auto getc = [&](const std::string& key, double dflt) {
    auto it = region.D_consts.find(key);
    return it == region.D_consts.end() ? dflt : it->second;
  };

  MembershipReport rep;
  auto add = [&](MembershipItem&& it) {
    rep.all_pass = rep.all_pass && it.pass;
    rep.items.push_back(std::move(it));
  };

  if (which == RegionSet::B) {
    std::array<MembershipItem, 6> items = {make_item("B: |U - mode| C0"),
                                           make_item("B: |U - mode| C1"),
                                           make_item("B: |U - mode| C2"),
                                           make_item("B: |Z - mode| C0"),
                                           make_item("B: |Z - mode| C1"),
                                           make_item("B: |Z - mode| C2")};
    for (const auto& f : samples) {
      FieldDerivs fd(f);
      const double tau = f.tau;
      const double amp = std::exp(B2l * tau);
      const double win_hi = region.M * std::exp(region.beta * tau);
      const double winU_lo = region.Upsilon_U * std::exp(-alpha * tau);
      const double winZ_lo = region.Upsilon_Z * std::exp(-alpha * tau);
      for (std::size_t i = 2; i + 2 < f.gamma.size(); ++i) {
        const double g = f.gamma[i];
        if (g >= win_hi) continue;
        const double e0 = std::pow(g, -ea) + std::pow(g, -2.0 * B2l);
        const double e1 = std::pow(g, -ea - 1.0) + std::pow(g, -2.0 * B2l);
        const double e2 = std::pow(g, -ea - 2.0) + std::pow(g, -2.0 * B2l);
        // stencil-noise floors for the finite-differenced comparisons
        const double h_loc = f.gamma[i + 1] - f.gamma[i];
        const double eps_fd = 64.0 * std::numeric_limits<double>::epsilon();
        if (g > winU_lo) {
          const double mag = std::abs(f.Utilde[i]) + amp * std::abs(spec.eigenfunction_u(k, g));
          const double fl1 = eps_fd * mag / h_loc, fl2 = eps_fd * mag / (h_loc * h_loc);
          const double dev0 = std::abs(f.Utilde[i] - amp * spec.eigenfunction_u(k, g));
          const double dev1 = std::abs(fd.U1[i] - amp * spec.eigenfunction_u_d1(k, g));
          const double dev2 = std::abs(fd.U2[i] - amp * spec.eigenfunction_u_d2(k, g));
          const double b0 = region.eta[0] * e0 * amp;
          const double b1 = region.eta[1] * e1 * amp + fl1;
          const double b2 = region.eta[2] * e2 * amp + fl2;
          update(items[0], dev0 - b0, b0 - dev0, g, tau);
          update(items[1], dev1 - b1, b1 - dev1, g, tau);
          update(items[2], dev2 - b2, b2 - dev2, g, tau);
        }
        if (g > winZ_lo) {
          const double mag = std::abs(f.Ztilde[i]) + amp * std::abs(spec.resolvent_mode_exact(k, g));
          const double fl1 = eps_fd * mag / h_loc, fl2 = eps_fd * mag / (h_loc * h_loc);
          const double dev0 = std::abs(f.Ztilde[i] - amp * spec.resolvent_mode_exact(k, g));
          const double dev1 = std::abs(fd.Z1[i] - amp * spec.resolvent_mode_exact_d1(k, g));
          const double dev2 = std::abs(fd.Z2[i] - amp * spec.resolvent_mode_exact_d2(k, g));
          const double b0 = region.eta[3] * e0 * amp;
          const double b1 = region.eta[4] * e1 * amp + fl1;
          const double b2 = region.eta[5] * e2 * amp + fl2;
          update(items[3], dev0 - b0, b0 - dev0, g, tau);
          update(items[4], dev1 - b1, b1 - dev1, g, tau);
          update(items[5], dev2 - b2, b2 - dev2, g, tau);
        }
      }
    }
    for (auto& it : items) add(std::move(it));
    return rep;
  }

  if (which == RegionSet::I) {
    const double a = getc("a", 3.5), b = getc("b", 3.0), c = getc("c", 1.6);
    const double kappa = getc("kappa", 1.5), eps = getc("eps", 0.05);
    const double D0U = getc("D0U", 2.0), D0Z = getc("D0Z", 2.0);
    const double D1 = getc("D1", 1.0), D2 = getc("D2", 1.0), D3 = getc("D3", 1.0);
    const double UpsII = getc("UpsilonII", region.Upsilon_U);
    const double winU = getc("win_U", region.Upsilon_U);
    const double winZ = getc("win_Z", region.Upsilon_Z);
    std::array<MembershipItem, 9> items = {
        make_item("I: U >= 0"),
        make_item("I: -1/g <= U_g <= 0"),
        make_item("I: U_gg + U_g/g >= 0"),
        make_item("I: 0 <= Z <= 1 - B^2"),
        make_item("I: |g U_g| + |g^2 U_gg| <= D0U"),
        make_item("I: |Z| + |g Z_g| + |g^2 Z_gg| <= D0Z"),
        make_item("I: U <= D1 Ups^{a-ea} (g e^{at})^-a"),
        make_item("I: Z <= D2 Ups^{(b/a)(a-ea)+eps} (g e^{at})^-b"),
        make_item("I: U <= D3 Ups^c (g e^{at})^{-ea-kappa}")};
    for (const auto& f : samples) {
      FieldDerivs fd(f);
      const double tau = f.tau;
      const double gU = winU * std::exp(-alpha * tau);
      const double gZ = winZ * std::exp(-alpha * tau);
      for (std::size_t i = 2; i + 2 < f.gamma.size(); ++i) {
        const double g = f.gamma[i];
        const double xi = g * std::exp(alpha * tau);
        if (g <= gU) {
          update(items[0], -f.Utilde[i], f.Utilde[i], g, tau);
          const double lo = -1.0 / g - fd.U1[i], hi = fd.U1[i];
          update(items[1], std::max(lo, hi), std::min(-lo, -hi), g, tau);
          const double lap = fd.U2[i] + fd.U1[i] / g;
          update(items[2], -lap, lap, g, tau);
          const double c2u = std::abs(g * fd.U1[i]) + std::abs(g * g * fd.U2[i]);
          update(items[4], c2u - D0U, D0U - c2u, g, tau);
          const double bnd1 = D1 * std::pow(UpsII, a - ea) * std::pow(xi, -a);
          update(items[6], f.Utilde[i] - bnd1, bnd1 - f.Utilde[i], g, tau);
          const double bnd3 = D3 * std::pow(UpsII, c) * std::pow(xi, -ea - kappa);
          update(items[8], f.Utilde[i] - bnd3, bnd3 - f.Utilde[i], g, tau);
        }
        if (g <= gZ) {
          const double viol = std::max(-f.Ztilde[i], f.Ztilde[i] - (1.0 - B2));
          update(items[3], viol, -viol, g, tau);
          const double c2z =
              std::abs(f.Ztilde[i]) + std::abs(g * fd.Z1[i]) + std::abs(g * g * fd.Z2[i]);
          update(items[5], c2z - D0Z, D0Z - c2z, g, tau);
          const double bnd2 =
              D2 * std::pow(UpsII, (b / a) * (a - ea) + eps) * std::pow(xi, -b);
          update(items[7], f.Ztilde[i] - bnd2, bnd2 - f.Ztilde[i], g, tau);
        }
      }
    }
    for (auto& it : items) add(std::move(it));
    return rep;
  }

  if (which == RegionSet::O) {
    const double D0 = getc("D0O", 1.0), D1 = getc("D1O", 0.01), D2 = getc("D2O", 10.0);
    const double T = getc("T", 1.0);
    std::array<MembershipItem, 4> items = {make_item("O: U >= 0"),
                                           make_item("O: U_g <= D0/g"),
                                           make_item("O: |Rm| <= D2 e^tau"),
                                           make_item("O: z^- <= Z <= 1")};
    for (const auto& f : samples) {
      FieldDerivs fd(f);
      const double tau = f.tau;
      const double Gamma = region.M * std::exp(region.beta_bar * tau);
      const double t = T - std::exp(-tau);
      for (std::size_t i = 2; i + 2 < f.gamma.size(); ++i) {
        const double g = f.gamma[i];
        if (g < Gamma) continue;
        update(items[0], -f.Utilde[i], f.Utilde[i], g, tau);
        update(items[1], fd.U1[i] - D0 / g, D0 / g - fd.U1[i], g, tau);
        if (rm_field) {
          const double rm = rm_field(g, tau);
          update(items[2], rm - D2 * std::exp(tau), D2 * std::exp(tau) - rm, g, tau);
        }
        const double psi = g * std::exp(-tau / 2.0);
        const auto zb = sine_cone_barrier(cone, D0 + 1.0, D1, t, {psi});
        const double Z = B2 + f.Ztilde[i];
        const double viol = std::max(zb.z_minus[0] - Z, Z - 1.0);
        update(items[3], viol, -viol, g, tau);
      }
    }
    for (auto& it : items) add(std::move(it));
    return rep;
  }

  // P-set: the pointwise-estimate bounds used by the error estimates
  {
    const double D0U = getc("D0U", 2.0), D0Ug = getc("D0Ug", 2.0), D0Z = getc("D0Z", 2.0);
    const double D1U = getc("D1U", 2.0), D1Z = getc("D1Z", 2.0);
    const double l = getc("l", 0.25 * ea), kappa = getc("kappa", 0.5 * ea);
    std::array<MembershipItem, 6> items = {
        make_item("P: U >= 0"),
        make_item("P: |U_g| <= 1/g"),
        make_item("P: |U| <= D0 min(|log g|, Ups^l xi^{-ea-kappa})"),
        make_item("P: |g U_g| + |g^2 U_gg| <= D0Ug"),
        make_item("P: |Z| + |g Z_g| + |g^2 Z_gg| <= D0Z"),
        make_item("P: C0 bounds on the mid window")};
    for (const auto& f : samples) {
      FieldDerivs fd(f);
      const double tau = f.tau;
      const double gU = region.Upsilon_U * std::exp(-alpha * tau);
      const double gmid = std::exp(-alpha * tau);
      for (std::size_t i = 2; i + 2 < f.gamma.size(); ++i) {
        const double g = f.gamma[i];
        const double xi = g * std::exp(alpha * tau);
        if (g <= gU) {
          update(items[0], -f.Utilde[i], f.Utilde[i], g, tau);
          const double v = std::abs(fd.U1[i]) - 1.0 / g;
          update(items[1], v, -v, g, tau);
        }
        if (g <= gmid) {
          const double env = D0U * std::min(std::abs(std::log(g)),
                                            std::pow(region.Upsilon_U, l) *
                                                std::pow(xi, -ea - kappa));
          update(items[2], std::abs(f.Utilde[i]) - env, env - std::abs(f.Utilde[i]), g, tau);
          const double c2u = std::abs(g * fd.U1[i]) + std::abs(g * g * fd.U2[i]);
          update(items[3], c2u - D0Ug, D0Ug - c2u, g, tau);
          const double c2z =
              std::abs(f.Ztilde[i]) + std::abs(g * fd.Z1[i]) + std::abs(g * g * fd.Z2[i]);
          update(items[4], c2z - D0Z, D0Z - c2z, g, tau);
        } else if (g <= gU) {
          const double env = std::pow(region.Upsilon_U, l) * std::pow(xi, -ea);
          const double vU = std::abs(f.Utilde[i]) - D1U * env;
          const double vZ = std::abs(f.Ztilde[i]) - D1Z * env;
          update(items[5], std::max(vU, vZ), std::min(-vU, -vZ), g, tau);
        }
      }
    }
    for (auto& it : items) add(std::move(it));
  }
  return rep;
}

}  // namespace warpflow
