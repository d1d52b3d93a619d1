#include "warpflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace warpflow {

void DiagnosticsRecord::append_time(double t) {
  require(times.empty() || t >= times.back(), "DiagnosticsRecord: time must be monotone");
  times.push_back(t);
}

bool DiagnosticsRecord::sign_count_nonincreasing() const {
  for (std::size_t i = 1; i < sign_count.size(); ++i)
    if (sign_count[i] > sign_count[i - 1]) return false;
  return true;
}

std::vector<double> projection_vector(const Spectrum& spec, const PerturbationFields& f, int k,
                                      int K, int quad_nodes) {
  const ConeParams& cone = spec.cone();
  const double b = 1.0 / (2.0 * cone.B2());
  const double ea = spec.exp_a();
  auto U_loc = [&](double r) {
    if (r <= f.gamma.front() || r >= f.gamma.back()) return 0.0;
    return f.cutoff(r) * interp_cubic(f.gamma, f.Utilde, r);
  };
  auto Z_loc = [&](double r) {
    if (r <= f.gamma.front() || r >= f.gamma.back()) return 0.0;
    return f.cutoff(r) * interp_cubic(f.gamma, f.Ztilde, r);
  };
  const double amp_k = std::exp(spec.B2_lambda(k) * f.tau);
  std::vector<double> out;
  WeightedIP ipu(cone.n, b, quad_nodes, -2.0 * ea);
  for (int j = 0; j < k; ++j)
    out.push_back(ipu.ip(U_loc, [&](double r) { return spec.eigenfunction_u(j, r); }));
  WeightedIP ipz(cone.n - 2.0, b, quad_nodes, 4.0);
  for (int j = 0; j <= K; ++j)
    out.push_back(ipz.ip(
        [&](double r) { return Z_loc(r) - amp_k * spec.resolvent_mode_exact(k, r); },
        [&](double r) { return spec.eigenfunction_z(j, r); }));
  return out;
}

// ---------------------------------------------------------------------------
// blow-up fitter
// ---------------------------------------------------------------------------

BlowupFit fit_blowup(std::span<const double> times, std::span<const double> max_rm) {
  BlowupFit out;
  const std::size_t n = times.size();
  if (n < 6 || max_rm.size() != n) {
    out.message = "need at least 6 samples";
    return out;
  }
  for (std::size_t i = 1; i < n; ++i)
    if (max_rm[i] <= max_rm[i - 1] * (1.0 - 1e-9)) {
      out.message = "no blow-up trend (curvature not monotone)";
      return out;
    }

  // Richardson-style seed for T: for type-I-like data 1/sqrt(max|Rm|) is
  // asymptotically linear in t and hits zero at T
  {
    const double y1 = 1.0 / std::sqrt(max_rm[n - 2]), y2 = 1.0 / std::sqrt(max_rm[n - 1]);
    const double t1 = times[n - 2], t2 = times[n - 1];
    const double slope = (y2 - y1) / (t2 - t1);
    out.T = (slope < 0.0) ? t2 - y2 / slope : times[n - 1] + (times[n - 1] - times[0]);
  }
  double logC = std::log(max_rm[0]);
  double e = 1.0;

  // Gauss-Newton on r_i = log M_i - logC + e log(T - t_i)
  for (int it = 0; it < 200; ++it) {
    double JtJ[3][3] = {}, Jtr[3] = {};
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double Tmt = out.T - times[i];
      if (Tmt <= 0.0) {
        out.message = "T estimate collapsed into the data window";
        return out;
      }
      const double r = std::log(max_rm[i]) - logC + e * std::log(Tmt);
      const double J0 = -1.0;                 // d/d logC
      const double J1 = std::log(Tmt);        // d/d e
      const double J2 = e / Tmt;              // d/d T
      const double J[3] = {J0, J1, J2};
      for (int a = 0; a < 3; ++a) {
        Jtr[a] += J[a] * r;
        for (int c = 0; c < 3; ++c) JtJ[a][c] += J[a] * J[c];
      }
      rss += r * r;
    }
    // damped 3x3 solve
    for (int a = 0; a < 3; ++a) JtJ[a][a] *= 1.0 + 1e-10;
    double A[3][4];
    for (int a = 0; a < 3; ++a) {
      for (int c = 0; c < 3; ++c) A[a][c] = JtJ[a][c];
      A[a][3] = -Jtr[a];
    }
    for (int c = 0; c < 2; ++c) {
      int piv = c;
      for (int rr = c + 1; rr < 3; ++rr)
        if (std::abs(A[rr][c]) > std::abs(A[piv][c])) piv = rr;
      std::swap(A[c], A[piv]);
      for (int rr = c + 1; rr < 3; ++rr) {
        const double fg = A[rr][c] / A[c][c];
        for (int cc = c; cc < 4; ++cc) A[rr][cc] -= fg * A[c][cc];
      }
    }
    double d2 = A[2][3] / A[2][2];
    double d1 = (A[1][3] - A[1][2] * d2) / A[1][1];
    double d0 = (A[0][3] - A[0][1] * d1 - A[0][2] * d2) / A[0][0];
    // keep T above the window
    double step = 1.0;
    while (out.T + step * d2 <= times[n - 1] + 1e-12 * (times[n - 1] - times[0]) && step > 1e-6)
      step *= 0.5;
    logC += step * d0;
    e += step * d1;
    out.T += step * d2;
    if (std::abs(step * d0) + std::abs(step * d1) + std::abs(step * d2) < 1e-13) break;
    (void)rss;
  }

  // standard error of the exponent from the residual variance
  {
    double rss = 0.0, JtJ11 = 0.0, sJ1 = 0.0, sJ0 = 0.0;
    std::vector<double> J1s(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double Tmt = out.T - times[i];
      const double r = std::log(max_rm[i]) - logC + e * std::log(Tmt);
      rss += r * r;
      J1s[i] = std::log(Tmt);
      sJ1 += J1s[i];
      sJ0 += 1.0;
    }
    double var = rss / std::max<double>(1.0, double(n) - 3.0);
    for (std::size_t i = 0; i < n; ++i) JtJ11 += (J1s[i] - sJ1 / sJ0) * (J1s[i] - sJ1 / sJ0);
    out.stderr_exponent = std::sqrt(var / std::max(JtJ11, 1e-300));
  }
  out.exponent = e;
  out.ok = true;
  // type I iff (T - t) max|Rm| stays bounded: compare first/last window values
  const double w0 = (out.T - times[0]) * max_rm[0];
  const double w1 = (out.T - times[n - 1]) * max_rm[n - 1];
  out.type_I = (w1 <= 4.0 * std::max(w0, 1.0));
  return out;
}

PoleCurvatureBound pole_curvature_lower(const Spectrum& spec, int k, const RescaledProfile& r,
                                        double Upsilon_U) {
  const ConeParams& cone = spec.cone();
  PoleCurvatureBound out;
  const double tau = r.tau;
  const double alpha = spec.alpha_k(k);
  const double g_in = Upsilon_U * std::exp(-alpha * tau);
  // U at the inner scale (interpolated; clamped to the grid edge)
  const double gq = std::clamp(g_in, r.gamma.front(), r.gamma.back());
  const double Uin = interp_cubic(r.gamma, r.U, gq);
  const double Ut_in = Uin - std::log(cone.A / cone.B * gq);
  out.lower_bound = std::exp(tau) * cone.B2() / (cone.A2() * Upsilon_U * Upsilon_U) *
                    std::exp(2.0 * alpha * tau) * std::exp(-2.0 * Ut_in);
  out.actual = std::exp(tau) * std::exp(-2.0 * r.U.front());
  return out;
}

// ---------------------------------------------------------------------------
// section-9 overlap
// ---------------------------------------------------------------------------

double overlap_coupled_d(const ConeParams& cone, double c_coef) {
  const double a = -3.0, n = cone.n;
  return 4.0 * cone.p * cone.B2() * a * c_coef / ((a - 2.0) * (n + a - 1.0));
}

ScalarOverlapTable scalar_overlap_check(const ConeParams& cone, double c_tilde,
                                        std::span<const double> Upsilons, double tau, int k) {
  require(cone.p == 5 && cone.q == 5, "scalar_overlap_check: formula unavailable; exact path only");
  const Spectrum spec(cone);
  const double alpha = spec.alpha_k(k);
  const double a = -3.0;
  const double d_tilde = overlap_coupled_d(cone, c_tilde);
  ScalarOverlapTable out;

  for (double Ups : Upsilons) {
    // psi = Upsilon e^{-alpha tau - tau/2}; c = c~ e^{B^2 lam tau + a tau / 2}
    const double psi = Ups * std::exp(-alpha * tau - 0.5 * tau);
    const double c = c_tilde * std::exp(spec.B2_lambda(k) * tau + 0.5 * a * tau);
    const double d = d_tilde * std::exp(spec.B2_lambda(k) * tau + 0.5 * a * tau);
    // exact curvature of the ansatz via the curvature generators
    const double z = cone.B2() + d * std::pow(psi, a);
    const double z1 = a * d * std::pow(psi, a - 1.0);
    const double u = std::log(cone.A / cone.B * psi) + c * std::pow(psi, a);
    const double u1 = 1.0 / psi + a * c * std::pow(psi, a - 1.0);
    const double u2 = -1.0 / (psi * psi) + a * (a - 1.0) * c * std::pow(psi, a - 2.0);
    ScalarOverlapRow row;
    row.Upsilon = Ups;
    row.R_exact = scalar_curvature_pointwise(cone, psi, z, z1, u, u1, u2);
    const double e2a1 = std::exp((2.0 * alpha + 1.0) * tau);
    row.R_printed = e2a1 * (20.0 / (3.0 * Ups * Ups)) *
                    (-36.0 * std::pow(c_tilde, 3) * std::pow(Ups, -9.0) +
                     4.0 * c_tilde * c_tilde * std::pow(Ups, -6.0) +
                     6.0 * c_tilde * std::pow(Ups, -3.0) +
                     3.0 * (std::exp(-2.0 * c_tilde * std::pow(Ups, -3.0)) - 1.0));
    row.ratio = row.R_exact / row.R_printed;
    out.rows.push_back(row);
  }

  // Taylor recombination: replacing the exponential by its cubic Taylor sum
  // collapses the bracket to -40 c^3 + 10 c^2 psi^3 exactly
  {
    const double c = 0.37, psi = 1.21;  // arbitrary nonzero check point
    const double p3 = std::pow(psi, 3), p6 = p3 * p3, p9 = p6 * p3;
    const double taylor = -2.0 * c / p3 + 2.0 * c * c / p6 - (4.0 / 3.0) * c * c * c / p9;
    const double lhs = -36.0 * c * c * c + 4.0 * c * c * p3 + 6.0 * c * p6 + 3.0 * taylor * p9;
    const double rhs = -40.0 * c * c * c + 10.0 * c * c * p3;
    out.taylor_defect = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
  }
  return out;
}

double typeI_scalar_monitor(const DiagnosticsRecord& rec, double T) {
  double sup = 0.0;
  for (std::size_t i = 0; i < rec.times.size(); ++i)
    sup = std::max(sup, (T - rec.times[i]) * rec.max_abs_r[i]);
  return sup;
}

ModeRateFit mode_decay_fit(std::span<const double> taus,
                           const std::vector<std::vector<double>>& amps, double noise_floor) {
  ModeRateFit out;
  if (amps.empty()) return out;
  const std::size_t n_modes = amps.front().size();
  const std::size_t n_t = taus.size();
  require(amps.size() == n_t, "mode_decay_fit: size mismatch");
  for (std::size_t m = 0; m < n_modes; ++m) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t i = 0; i < n_t; ++i) {
      const double a = std::abs(amps[i][m]);
      if (a < noise_floor) continue;
      const double x = taus[i], y = std::log(a);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
    if (cnt < 2) {
      out.rates.push_back(0.0);
    } else {
      out.rates.push_back((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx));
    }
    out.finals.push_back(amps.back()[m]);
  }
  return out;
}

}  // namespace warpflow
