#include "warpflow/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace warpflow {

double ModeCoefficients::norm() const {
  double acc = 0.0;
  for (double v : p_vec) acc += v * v;
  for (double v : q_vec) acc += v * v;
  return std::sqrt(acc);
}

int interlacing_K(const Spectrum& spec, int k) {
  const double B2l = spec.B2_lambda(k);
  require(B2l < -1.0, "interlacing_K: lambda_k must lie below h_0");
  const double m = -B2l;  // in (K+1, K+2)
  const int K = static_cast<int>(std::floor(m - 1.0));
  require(std::abs(m - std::round(m)) > 1e-9, "interlacing_K: eigenvalue collision");
  return K;
}

void parabolic_block(const Spectrum& spec, const ModeCoefficients& mc, double tau0,
                     std::span<const double> gamma, std::span<double> Ztilde,
                     std::span<double> Utilde) {
  require(int(mc.p_vec.size()) == mc.k, "parabolic_block: p_vec must have k entries");
  require(int(mc.q_vec.size()) == mc.K + 1, "parabolic_block: q_vec must have K+1 entries");
  require(mc.K == interlacing_K(spec, mc.k), "parabolic_block: K mismatch with interlacing");
  const double amp = std::exp(spec.B2_lambda(mc.k) * tau0);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    double U = amp * spec.eigenfunction_u(mc.k, g);
    for (int j = 0; j < mc.k; ++j) U += mc.p_vec[j] * spec.eigenfunction_u(j, g);
    double Z = amp * spec.resolvent_mode_exact(mc.k, g);
    for (int j = 0; j <= mc.K; ++j) Z += mc.q_vec[j] * spec.eigenfunction_z(j, g);
    Utilde[i] = U;
    Ztilde[i] = Z;
  }
}

namespace {

struct BlockDerivs {
  double U, U1, U2, U3;
  double Z, Z1, Z2;
};

BlockDerivs block_at(const Spectrum& spec, const ModeCoefficients& mc, double tau0, double g) {
  const double amp = std::exp(spec.B2_lambda(mc.k) * tau0);
  BlockDerivs b{};
  b.U = amp * spec.eigenfunction_u(mc.k, g);
  b.U1 = amp * spec.eigenfunction_u_d1(mc.k, g);
  b.U2 = amp * spec.eigenfunction_u_d2(mc.k, g);
  b.Z = amp * spec.resolvent_mode_exact(mc.k, g);
  b.Z1 = amp * spec.resolvent_mode_exact_d1(mc.k, g);
  b.Z2 = amp * spec.resolvent_mode_exact_d2(mc.k, g);
  for (int j = 0; j < mc.k; ++j) {
    b.U += mc.p_vec[j] * spec.eigenfunction_u(j, g);
    b.U1 += mc.p_vec[j] * spec.eigenfunction_u_d1(j, g);
    b.U2 += mc.p_vec[j] * spec.eigenfunction_u_d2(j, g);
  }
  for (int j = 0; j <= mc.K; ++j) {
    b.Z += mc.q_vec[j] * spec.eigenfunction_z(j, g);
    b.Z1 += mc.q_vec[j] * spec.eigenfunction_z_d1(j, g);
    b.Z2 += mc.q_vec[j] * spec.eigenfunction_z_d2(j, g);
  }
  // third derivative of U by a small central difference of U2
  const double h = 1e-5 * g;
  double u2p = amp * spec.eigenfunction_u_d2(mc.k, g + h);
  double u2m = amp * spec.eigenfunction_u_d2(mc.k, g - h);
  for (int j = 0; j < mc.k; ++j) {
    u2p += mc.p_vec[j] * spec.eigenfunction_u_d2(j, g + h);
    u2m += mc.p_vec[j] * spec.eigenfunction_u_d2(j, g - h);
  }
  b.U3 = (u2p - u2m) / (2.0 * h);
  return b;
}

}  // namespace

double InnerExtension::f_of(double gamma) const {
  const double eta = gamma / gamma_b;
  const double e2 = eta * eta;
  const double g = a0 * (1.0 - e2) * (1.0 - e2) + alpha2 * e2 + alpha4 * e2 * e2;
  return g / (gamma * gamma);
}

double InnerExtension::gammaU_gamma(double gamma) const {
  const double eta = gamma / gamma_b;
  const double e2 = eta * eta;
  const double P = a0 * (3.0 * e2 - 3.0 * e2 * e2 + e2 * e2 * e2) / 6.0 +
                   alpha2 * e2 * e2 / 4.0 + alpha4 * e2 * e2 * e2 / 6.0;
  return -1.0 + P;
}

namespace {
double Q_of(const InnerExtension& ie, double eta) {
  const double e2 = eta * eta;
  return ie.a0 * (1.5 * e2 - 0.75 * e2 * e2 + e2 * e2 * e2 / 6.0) / 6.0 +
         ie.alpha2 * e2 * e2 / 16.0 + ie.alpha4 * e2 * e2 * e2 / 36.0;
}
}  // namespace

double InnerExtension::U_of(double gamma) const {
  const double eta = gamma / gamma_b;
  return U_b - std::log(eta) - (Q_of(*this, 1.0) - Q_of(*this, eta));
}

double InnerExtension::U_limit_at_pole() const {
  // lim_{gamma->0} [ log(gamma) + U(gamma) ] (the log-divergences cancel)
  return std::log(gamma_b) + U_b - Q_of(*this, 1.0);
}

double InnerExtension::Z_of(double gamma) const {
  const double eta = gamma / gamma_b;
  const double e2 = eta * eta;
  const double cap = (1.0 - B2) * std::pow(1.0 - e2, 3.0);
  const double tail = e2 * (zA + zB * e2 + zC * e2 * e2);
  return cap + tail;
}

double InnerExtension::Z_d1(double gamma) const {
  const double eta = gamma / gamma_b;
  const double e2 = eta * eta;
  const double dcap = -(1.0 - B2) * 6.0 * eta * (1.0 - e2) * (1.0 - e2);
  const double dtail = 2.0 * eta * zA + 4.0 * eta * e2 * zB + 6.0 * eta * e2 * e2 * zC;
  return (dcap + dtail) / gamma_b;
}

InnerExtension inner_extension(const Spectrum& spec, const ModeCoefficients& mc,
                               const RegionParams& region, double tau0) {
  require(mc.k % 2 == 0, "inner_extension: k must be even");
  InnerExtension ie;
  ie.B2 = spec.cone().B2();
  ie.gamma_b = region.Upsilon_bar * std::exp(-region.alpha * tau0);
  const auto b = block_at(spec, mc, tau0, ie.gamma_b);
  ie.U_b = b.U;
  ie.dU_b = b.U1;
  ie.Z_b = b.Z;
  ie.dZ_b = b.Z1;
  ie.d2Z_b = b.Z2;
  require(ie.U_b > 0.0, "inner_extension: boundary value of U not positive (k even, tau0 large?)");

  const double gb = ie.gamma_b;
  const double f_b = b.U2 + b.U1 / gb;
  const double fp_b = b.U3 + b.U2 / gb - b.U1 / (gb * gb);
  const double g1 = gb * gb * f_b;
  const double gp1 = gb * gb * gb * fp_b;
  ie.alpha4 = 0.5 * (gp1 - 2.0 * g1);
  ie.alpha2 = g1 - ie.alpha4;
  const double I_target = 1.0 + gb * b.U1;
  ie.a0 = 6.0 * I_target - 1.5 * ie.alpha2 - ie.alpha4;

  // f >= 0 and the reported sup |gamma^2 f|
  double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double eta = double(i) / 400.0;
    const double e2 = eta * eta;
    const double g = ie.a0 * (1.0 - e2) * (1.0 - e2) + ie.alpha2 * e2 + ie.alpha4 * e2 * e2;
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, std::abs(g));
  }
  if (gmin < 0.0)
    throw std::domain_error("inner_extension: infeasible f (negative) for boundary data U_b=" +
                            std::to_string(ie.U_b) + ", gb U'_b=" + std::to_string(gb * b.U1));
  ie.sup_g2f = gmax;
  ie.integral_defect = (ie.a0 / 6.0 + ie.alpha2 / 4.0 + ie.alpha4 / 6.0) - I_target;

  // Z extension: smooth cone cap plus a tail matched to (Z_b, Z_b', Z_b'')
  const double t1 = ie.Z_b, t2 = gb * ie.dZ_b, t3 = gb * gb * ie.d2Z_b;
  // solve A+B+C = t1; 2A+4B+6C = t2; 2A+12B+30C = t3
  ie.zC = (t3 - 2.0 * t1 - 4.0 * (0.5 * t2 - t1)) / 8.0;
  ie.zB = 0.5 * t2 - t1 - 2.0 * ie.zC;
  ie.zA = t1 - ie.zB - ie.zC;
  for (int i = 0; i <= 400; ++i) {
    const double eta = double(i) / 400.0;
    const double w = ie.Z_of(gb * std::max(eta, 1e-9));
    if (w < -1e-15 || w > 1.0 - ie.B2 + 1e-12)
      throw std::domain_error("inner_extension: Z extension left [0, 1-B^2]");
  }
  return ie;
}

OuterExtension outer_extension(const Spectrum& spec, const RegionParams& region, double tau0,
                               double T, double psi_if, double z_if, double u_if, double du_if,
                               double s_if) {
  const ConeParams& cone = spec.cone();
  const double p = cone.p, q = cone.q;
  OuterExtension oe;
  oe.psi_if = psi_if;
  oe.s_if = s_if;
  oe.D0 = region.D_consts.count("D0O") ? region.D_consts.at("D0O") : 1.0;
  const double C = oe.D0 + 1.0;
  oe.D1 = 0.5 / ((q + C * C * p) * T);
  const double t0 = T - std::exp(-tau0);
  const double K_t0 = oe.D1 / (1.0 - oe.D1 * (C * C * p + q) * t0);
  require(K_t0 > 0.0, "outer_extension: K(t) must stay positive");
  oe.z0_outer = (q - 1.0) / (q - 1.0 + p * C * C);
  oe.K_tilde = 0.8 * K_t0;
  oe.psi_star = std::sqrt(2.0 * oe.z0_outer / K_t0);
  require(psi_if < oe.psi_star, "outer_extension: interface beyond the sine-cone zero");

  const double f_if = psi_if * du_if;
  require(f_if >= 1.0 - 1e-9 && f_if <= 2.0, "outer_extension: interface f outside [1, 2]");
  require(u_if - std::log(psi_if) >= std::log(cone.A / cone.B) - 1e-12,
          "outer_extension: interface log(phi/psi) below log(A/B) (k even and tau0 >> 1?)");

  auto z_alt = [&](double psi) { return oe.z0_outer - 0.5 * oe.K_tilde * psi * psi; };
  auto z_minus = [&](double psi) {
    const double K = oe.D1 / (1.0 - oe.D1 * (C * C * p + q) * t0);
    return std::max(0.0, oe.z0_outer - 0.5 * K * psi * psi);
  };
  // blend from the interface data onto the sine-cone-parallel profile
  const double psi_plate = psi_if + 0.05 * (oe.psi_star - psi_if);
  const double psi_blend = psi_if + 0.45 * (oe.psi_star - psi_if);
  // interface slope continuation: z stays near z_if on the plateau
  auto z_of = [&](double psi) {
    const double w = SmoothBump::value((psi - psi_plate) / (psi_blend - psi_plate));
    return w * z_if + (1.0 - w) * z_alt(psi);
  };

  const int n_z = 1400, n_collar = 400;
  oe.s.reserve(n_z + n_collar + 1);
  oe.psi.reserve(n_z + n_collar + 1);
  oe.z.reserve(n_z + n_collar + 1);
  oe.phi.reserve(n_z + n_collar + 1);

  const double f_decay_span = 0.35 * (oe.psi_star - psi_if);
  double s = s_if, logphi = u_if;
  double psi_prev = psi_if, z_prev = z_of(psi_if), F_prev = f_if;
  oe.s.push_back(s);
  oe.psi.push_back(psi_if);
  oe.z.push_back(z_prev);
  oe.phi.push_back(std::exp(logphi));
  for (int i = 1; i <= n_z; ++i) {
    const double psi = psi_if + (oe.psi_star - psi_if) * double(i) / double(n_z);
    const double z = z_of(psi);
    require(z > 0.0 && z <= 1.0, "outer_extension: z left (0, 1]");
    require(z > z_minus(psi), "outer_extension: z fell below the lower barrier");
    const double F = 1.0 + (f_if - 1.0) * SmoothBump::value((psi - psi_if) / f_decay_span);
    const double dpsi = psi - psi_prev;
    s += 0.5 * (1.0 / std::sqrt(z) + 1.0 / std::sqrt(z_prev)) * dpsi;
    logphi += 0.5 * (F / psi + F_prev / psi_prev) * dpsi;
    oe.s.push_back(s);
    oe.psi.push_back(psi);
    oe.z.push_back(z);
    oe.phi.push_back(std::exp(logphi));
    psi_prev = psi;
    z_prev = z;
    F_prev = F;
  }
  oe.s_star = s;

  // equator collar [s_*, s_* + 1]: psi_s descends from sqrt(z(psi_*)) to 0
  const double v_star = std::sqrt(z_prev);
  const double c_slope0 = (-oe.K_tilde * oe.psi_star / 2.0) / v_star;
  const double c_slope1 = -0.9;
  const double m = c_slope0;
  const double bcoef = c_slope1 + m + 2.0;
  const double acoef = -3.0 - 2.0 * m - c_slope1;
  auto C_of = [&](double sg) { return 1.0 + m * sg + acoef * sg * sg + bcoef * sg * sg * sg; };
  double psi_c = oe.psi_star;
  double sig_prev = 0.0;
  for (int i = 1; i <= n_collar; ++i) {
    const double sig = double(i) / double(n_collar);
    const double Cv = C_of(sig);
    require(Cv > -1e-12, "outer_extension: collar slope turned negative early");
    const double ds = (sig - sig_prev);
    const double ps_mid = v_star * C_of(0.5 * (sig + sig_prev));
    psi_c += ps_mid * ds;
    s = oe.s_star + sig;
    const double psl = v_star * std::max(Cv, 0.0);
    logphi += (psl / psi_c) * ds * 1.0;  // F == 1 on the collar
    oe.s.push_back(s);
    oe.psi.push_back(psi_c);
    oe.z.push_back(psl * psl);
    oe.phi.push_back(std::exp(logphi));
    sig_prev = sig;
  }
  oe.s_equator = oe.s_star + 1.0;

  // curvature samples over the outer region (generators in arc length)
  {
    GridDerivative d(oe.s);
    double rm = 0.0;
    for (std::size_t i = 3; i + 3 < oe.s.size(); ++i) {
      const double phs = d.deriv(oe.phi, i, 1), phss = d.deriv(oe.phi, i, 2);
      const double pss = d.deriv(oe.psi, i, 1), psss = d.deriv(oe.psi, i, 2);
      const double ph = oe.phi[i], ps = oe.psi[i];
      const double l = (1.0 - pss * pss) / (ps * ps);
      const double kk = -psss / ps;
      const double j = (1.0 - phs * phs) / (ph * ph);
      const double h = -phss / ph;
      const double mm = -phs * pss / (ph * ps);
      rm = std::max(rm, std::max({std::abs(l), std::abs(kk), std::abs(j), std::abs(h),
                                  std::abs(mm)}));
    }
    oe.D2_measured = rm * std::exp(-tau0);
  }
  return oe;
}

// ---------------------------------------------------------------------------
// assemble
// ---------------------------------------------------------------------------

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
  return g;
}

}  // namespace

AssembleResult assemble(const Spectrum& spec, const ModeCoefficients& mc,
                        const RegionParams& region, double T) {
  require(mc.k % 2 == 0, "assemble: k must be even");
  const ConeParams& cone = spec.cone();
  const double B2 = cone.B2();
  const double tau0 = region.tau0;
  const double amp = std::exp(spec.B2_lambda(mc.k) * tau0);
  require(mc.norm() <= mc.eps0 * amp * (1.0 + 1e-12),
          "assemble: coefficients outside the eps0 ball");

  AssembleResult out;
  out.T = T;
  out.inner = inner_extension(spec, mc, region, tau0);
  const double gamma_b = out.inner.gamma_b;
  const double gamma_hi = region.M * std::exp(region.beta_bar * tau0);
  const double scale = std::exp(-tau0 / 2.0);  // psi = gamma * scale

  // rescaled-perturbation fields over inner + parabolic + sideways-outer
  const auto g_inner = log_grid(1e-3 * gamma_b, gamma_b, 160);
  const auto g_parab = log_grid(gamma_b, gamma_hi, 1100);
  PerturbationFields f;
  f.cone = cone;
  f.tau = tau0;
  f.M = region.M;
  f.beta = region.beta;
  for (std::size_t i = 0; i + 1 < g_inner.size(); ++i) {
    f.gamma.push_back(g_inner[i]);
    f.Ztilde.push_back(out.inner.Z_of(g_inner[i]));
    f.Utilde.push_back(out.inner.U_of(g_inner[i]));
  }
  {
    std::vector<double> Z(g_parab.size()), U(g_parab.size());
    parabolic_block(spec, mc, tau0, g_parab, Z, U);
    for (std::size_t i = 0; i < g_parab.size(); ++i) {
      f.gamma.push_back(g_parab[i]);
      f.Ztilde.push_back(Z[i]);
      f.Utilde.push_back(U[i]);
    }
  }

  // outer extension in the original variables
  const double psi_if = gamma_hi * scale;
  const auto bif = block_at(spec, mc, tau0, gamma_hi);
  const double z_if = B2 + bif.Z;
  const double u_if = std::log(cone.A / cone.B * gamma_hi) + bif.U - tau0 / 2.0;
  const double du_if = (1.0 / gamma_hi + bif.U1) / scale;

  // arc length of the inner + parabolic branch from the pole: psi-grid with a
  // pole node, trapezoid of 1/sqrt(z)
  std::vector<double> psi_ip, z_ip, u_ip;
  psi_ip.push_back(0.0);
  z_ip.push_back(1.0);
  u_ip.push_back(0.0);  // placeholder, phi set from the limit below
  for (std::size_t i = 0; i < f.gamma.size(); ++i) {
    psi_ip.push_back(f.gamma[i] * scale);
    z_ip.push_back(B2 + f.Ztilde[i]);
    u_ip.push_back(std::log(cone.A / cone.B * f.gamma[i]) + f.Utilde[i] - tau0 / 2.0);
  }
  std::vector<double> s_ip(psi_ip.size(), 0.0);
  for (std::size_t i = 1; i < psi_ip.size(); ++i) {
    const double f0 = 1.0 / std::sqrt(z_ip[i - 1]);
    const double f1 = 1.0 / std::sqrt(z_ip[i]);
    s_ip[i] = s_ip[i - 1] + 0.5 * (f0 + f1) * (psi_ip[i] - psi_ip[i - 1]);
  }
  out.outer = outer_extension(spec, region, tau0, T, psi_if, z_if, u_if, du_if, s_ip.back());

  // sideways-outer branch appended to the perturbation fields (z-chart part)
  for (std::size_t i = 1; i < out.outer.psi.size(); ++i) {
    if (out.outer.s[i] > out.outer.s_star) break;  // collar is not a z-chart
    f.gamma.push_back(out.outer.psi[i] / scale);
    f.Ztilde.push_back(out.outer.z[i] - B2);
    f.Utilde.push_back(std::log(out.outer.phi[i]) + tau0 / 2.0 -
                       std::log(cone.A / cone.B * out.outer.psi[i] / scale));
  }
  out.fields = f;

  // glue the warped profile (half manifold, pole .. equator)
  WarpedProfile& w = out.profile;
  w.cone = cone;
  w.t = T - std::exp(-tau0);
  w.has_left_pole = true;
  w.reflection_symmetric = true;
  std::vector<double> s_all = s_ip;
  std::vector<double> psi_all = psi_ip;
  std::vector<double> phi_all(psi_ip.size());
  const double u_pole =
      std::log(cone.A / cone.B) + out.inner.U_limit_at_pole() - tau0 / 2.0;
  phi_all[0] = std::exp(u_pole);
  for (std::size_t i = 1; i < psi_ip.size(); ++i) phi_all[i] = std::exp(u_ip[i]);
  for (std::size_t i = 1; i < out.outer.s.size(); ++i) {
    s_all.push_back(out.outer.s[i]);
    psi_all.push_back(out.outer.psi[i]);
    phi_all.push_back(out.outer.phi[i]);
  }
  const double s_eq = s_all.back();
  w.x.resize(s_all.size());
  w.chi.assign(s_all.size(), s_eq);
  for (std::size_t i = 0; i < s_all.size(); ++i) w.x[i] = -1.0 + s_all[i] / s_eq;
  w.phi = phi_all;
  w.psi = psi_all;

  // measured constants for the membership report
  RegionParams reg = region;
  const double ea = spec.exp_a();
  auto getc = [&](const char* key, double dflt) {
    auto it = reg.D_consts.find(key);
    return it == reg.D_consts.end() ? dflt : it->second;
  };
  const double a_c = getc("a", 3.5), b_c = getc("b", 3.0), c_c = getc("c", 1.6);
  const double kap = getc("kappa", 1.4);
  reg.D_consts["a"] = a_c;
  reg.D_consts["b"] = b_c;
  reg.D_consts["c"] = c_c;
  reg.D_consts["kappa"] = kap;
  reg.D_consts["eps"] = getc("eps", 0.05);
  reg.D_consts["win_U"] = region.Upsilon_bar;
  reg.D_consts["win_Z"] = region.Upsilon_bar;
  reg.D_consts["UpsilonII"] = region.Upsilon_U;
  reg.D_consts["T"] = T;
  reg.D_consts["D0O"] = out.outer.D0;
  reg.D_consts["D1O"] = out.outer.D1;
  reg.D_consts["D2O"] = 1.25 * out.outer.D2_measured;
  {
    // measure the weighted C2 and Barrier II constants over the inner window
    GridDerivative d(f.gamma);
    auto U1 = d.deriv_all(f.Utilde, 1);
    auto U2 = d.deriv_all(f.Utilde, 2);
    auto Z1 = d.deriv_all(f.Ztilde, 1);
    auto Z2 = d.deriv_all(f.Ztilde, 2);
    double d0u = 0, d0z = 0, d1 = 0, d2 = 0, d3 = 0;
    for (std::size_t i = 2; i + 2 < f.gamma.size(); ++i) {
      const double g = f.gamma[i];
      if (g > gamma_b) break;
      const double xi = g * std::exp(region.alpha * tau0);
      d0u = std::max(d0u, std::abs(g * U1[i]) + std::abs(g * g * U2[i]));
      d0z = std::max(d0z, std::abs(f.Ztilde[i]) + std::abs(g * Z1[i]) +
                              std::abs(g * g * Z2[i]));
      d1 = std::max(d1, f.Utilde[i] / (std::pow(region.Upsilon_U, a_c - ea) *
                                       std::pow(xi, -a_c)));
      d2 = std::max(d2, f.Ztilde[i] / (std::pow(region.Upsilon_U,
                                                (b_c / a_c) * (a_c - ea) + reg.D_consts["eps"]) *
                                       std::pow(xi, -b_c)));
      d3 = std::max(d3, f.Utilde[i] / (std::pow(region.Upsilon_U, c_c) *
                                       std::pow(xi, -ea - kap)));
    }
    reg.D_consts["D0U"] = 1.25 * d0u + 1e-6;
    reg.D_consts["D0Z"] = 1.25 * d0z + 1e-6;
    reg.D_consts["D1"] = 1.25 * d1 + 1e-6;
    reg.D_consts["D2"] = 1.25 * d2 + 1e-6;
    reg.D_consts["D3"] = 1.25 * d3 + 1e-6;
  }

  // |Rm| over the warped profile for the O-set, as a function of gamma
  std::vector<double> rm_gamma, rm_val;
  {
    GridDerivative d(s_all);
    for (std::size_t i = 3; i + 3 < s_all.size(); ++i) {
      if (psi_all[i] <= 0.0) continue;
      const double phs = d.deriv(phi_all, i, 1), phss = d.deriv(phi_all, i, 2);
      const double pss = d.deriv(psi_all, i, 1), psss = d.deriv(psi_all, i, 2);
      const double ph = phi_all[i], ps = psi_all[i];
      const double rm = std::max({std::abs((1.0 - pss * pss) / (ps * ps)),
                                  std::abs(psss / ps), std::abs((1.0 - phs * phs) / (ph * ph)),
                                  std::abs(phss / ph), std::abs(phs * pss / (ph * ps))});
      rm_gamma.push_back(ps / scale);
      rm_val.push_back(rm);
    }
  }
  auto rm_field = [rm_gamma, rm_val](double g, double) {
    if (g <= rm_gamma.front() || g >= rm_gamma.back()) return 0.0;
    return interp_cubic(rm_gamma, rm_val, g);
  };

  out.memb_I = membership_check({f}, spec, mc.k, reg, RegionSet::I);
  out.memb_B = membership_check({f}, spec, mc.k, reg, RegionSet::B);
  out.memb_O = membership_check({f}, spec, mc.k, reg, RegionSet::O, rm_field);
  return out;
}

std::vector<double> project_mode_amplitudes(const Spectrum& spec, const PerturbationFields& f,
                                            int k, int K, int quad_nodes) {
  const ConeParams& cone = spec.cone();
  const double b = 1.0 / (2.0 * cone.B2());
  const double ea = spec.exp_a();
  auto U_interp = [&](double r) {
    if (r <= f.gamma.front() || r >= f.gamma.back()) return 0.0;
    return interp_cubic(f.gamma, f.Utilde, r);
  };
  auto Z_interp = [&](double r) {
    if (r <= f.gamma.front() || r >= f.gamma.back()) return 0.0;
    return interp_cubic(f.gamma, f.Ztilde, r);
  };
  const double amp_k = std::exp(spec.B2_lambda(k) * f.tau);
  std::vector<double> out;
  WeightedIP ipu(cone.n, b, quad_nodes, -2.0 * ea);
  for (int j = 0; j < k; ++j) {
    auto ej = [&](double r) { return spec.eigenfunction_u(j, r); };
    out.push_back(ipu.ip(U_interp, ej));
  }
  WeightedIP ipz(cone.n - 2.0, b, quad_nodes, 4.0);
  for (int j = 0; j <= K; ++j) {
    auto ej = [&](double r) { return spec.eigenfunction_z(j, r); };
    auto fz = [&](double r) { return Z_interp(r) - amp_k * spec.resolvent_mode_exact(k, r); };
    out.push_back(ipz.ip(fz, ej));
  }
  // recovered k-mode amplitude
  auto ek = [&](double r) { return spec.eigenfunction_u(k, r); };
  out.push_back(ipu.ip(U_interp, ek));
  return out;
}

}  // namespace warpflow
