#include "warpflow/profiles.hpp"

#include <algorithm>
#include <cmath>

namespace warpflow {

std::vector<double> WarpedProfile::arc_length() const {
  std::vector<double> s(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i)
    s[i] = s[i - 1] + 0.5 * (chi[i] + chi[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

SidewaysProfile to_sideways(const WarpedProfile& w, Half half, std::size_t n_psi) {
  const std::size_t n = w.x.size();
  require(n >= 8, "to_sideways: grid too small");
  // select the half: for a reflection-symmetric full profile the equator is at
  // x = 0; otherwise the caller passes a half-manifold profile directly.
  std::size_t lo = 0, hi = n;
  if (w.reflection_symmetric) {
    auto mid = std::lower_bound(w.x.begin(), w.x.end(), 0.0);
    const std::size_t im = static_cast<std::size_t>(mid - w.x.begin());
    if (half == Half::left)
      hi = im + 1;
    else
      lo = im;
  }
  const auto s_all = w.arc_length();
  std::vector<double> s(s_all.begin() + lo, s_all.begin() + hi);
  std::vector<double> psi(w.psi.begin() + lo, w.psi.begin() + hi);
  std::vector<double> phi(w.phi.begin() + lo, w.phi.begin() + hi);

  // psi_s along the half must keep one sign (Sturmian count 1 on the full
  // reflected manifold); equivalently psi strictly monotone here.
  GridDerivative ds(s);
  std::vector<double> psi_s = ds.deriv_all(psi, 1);
  const double mx = *std::max_element(psi_s.begin(), psi_s.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b); });
  int changes = sign_change_count(psi_s, 1e-10);
  (void)mx;
  if (changes != 0) throw std::domain_error("to_sideways: sideways chart invalid (psi_s changes sign)");

  const bool increasing = psi.back() > psi.front();
  if (!increasing) {
    std::reverse(psi.begin(), psi.end());
    std::reverse(phi.begin(), phi.end());
    std::reverse(psi_s.begin(), psi_s.end());
  }
  for (std::size_t i = 1; i < psi.size(); ++i)
    if (!(psi[i] > psi[i - 1]))
      throw std::domain_error("to_sideways: sideways chart invalid (psi not strictly monotone)");

  std::vector<double> zval(psi.size()), uval(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    zval[i] = psi_s[i] * psi_s[i];
    uval[i] = std::log(phi[i]);
  }

  SidewaysProfile out;
  out.cone = w.cone;
  out.t = w.t;
  if (n_psi == 0) {
    out.psi = psi;
    out.z = zval;
    out.u = uval;
    return out;
  }
  // resample on a uniform psi grid strictly inside the covered range; monotone
  // cubic keeps z from overshooting above 1 near the pole.
  Pchip zi(psi, zval), ui(psi, uval);
  const double a = psi.front(), b = psi.back();
  out.psi.resize(n_psi);
  out.z.resize(n_psi);
  out.u.resize(n_psi);
  for (std::size_t i = 0; i < n_psi; ++i) {
    const double pq = a + (b - a) * double(i) / double(n_psi - 1);
    out.psi[i] = pq;
    out.z[i] = zi(pq);
    out.u[i] = ui(pq);
  }
  return out;
}

WarpedProfile from_sideways(const SidewaysProfile& sp, bool left_pole) {
  const std::size_t n = sp.psi.size();
  WarpedProfile w;
  w.cone = sp.cone;
  w.t = sp.t;
  w.has_left_pole = left_pole;
  w.chi.assign(n, 1.0);
  w.psi = sp.psi;
  w.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.phi[i] = std::exp(sp.u[i]);
  // s from ds = dpsi / sqrt(z) (trapezoid in psi); x = s rescaled to unit span
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double f0 = 1.0 / std::sqrt(std::max(sp.z[i - 1], 1e-300));
    const double f1 = 1.0 / std::sqrt(std::max(sp.z[i], 1e-300));
    s[i] = s[i - 1] + 0.5 * (f0 + f1) * (sp.psi[i] - sp.psi[i - 1]);
  }
  const double span = s.back() - s.front();
  w.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.x[i] = -1.0 + 2.0 * (s[i] - s.front()) / span;
  // chi = ds/dx constant by this parametrization
  std::fill(w.chi.begin(), w.chi.end(), span / 2.0);
  return w;
}

RescaledProfile to_rescaled(const SidewaysProfile& s, double T) {
  require(s.t < T, "to_rescaled: need t < T");
  RescaledProfile r;
  r.cone = s.cone;
  r.T = T;
  r.tau = -std::log(T - s.t);
  const double scale = std::exp(r.tau / 2.0);
  r.gamma.resize(s.psi.size());
  r.Z = s.z;
  r.U.resize(s.u.size());
  for (std::size_t i = 0; i < s.psi.size(); ++i) {
    r.gamma[i] = scale * s.psi[i];
    r.U[i] = s.u[i] + r.tau / 2.0;
  }
  return r;
}

SidewaysProfile from_rescaled(const RescaledProfile& r) {
  SidewaysProfile s;
  s.cone = r.cone;
  s.t = r.T - std::exp(-r.tau);
  const double scale = std::exp(-r.tau / 2.0);
  s.psi.resize(r.gamma.size());
  s.z = r.Z;
  s.u.resize(r.U.size());
  for (std::size_t i = 0; i < r.gamma.size(); ++i) {
    s.psi[i] = scale * r.gamma[i];
    s.u[i] = r.U[i] - r.tau / 2.0;
  }
  return s;
}

double sine_cone_lambda2(const ConeParams& c, double lambda0, double t) {
  return lambda0 * lambda0 - 2.0 * double(c.n) * t;
}

SidewaysProfile special_solution(const ConeParams& c, SpecialKind kind, const SpecialParams& sp,
                                 double t, const std::vector<double>& psi_grid) {
  SidewaysProfile s;
  s.cone = c;
  s.t = t;
  s.psi = psi_grid;
  s.z.resize(psi_grid.size());
  s.u.resize(psi_grid.size());
  const double AB = c.A / c.B;
  switch (kind) {
    case SpecialKind::rfc:
      for (std::size_t i = 0; i < psi_grid.size(); ++i) {
        s.z[i] = c.B2();
        s.u[i] = std::log(AB * psi_grid[i]);
      }
      break;
    case SpecialKind::sine_cone: {
      const double l2 = sine_cone_lambda2(c, sp.lambda0, t);
      require(l2 > 0.0, "special_solution: sine cone past extinction");
      const double psi_max = c.B * std::sqrt(l2);
      for (std::size_t i = 0; i < psi_grid.size(); ++i) {
        require(psi_grid[i] <= psi_max * (1.0 + 1e-12), "special_solution: psi beyond sine-cone domain");
        s.z[i] = c.B2() - psi_grid[i] * psi_grid[i] / l2;
        s.u[i] = std::log(AB * psi_grid[i]);
      }
      break;
    }
    case SpecialKind::cylinder: {
      const double phi2 = std::exp(2.0 * sp.u0) - 2.0 * double(c.p - 1) * t;
      require(phi2 > 0.0, "special_solution: cylinder factor collapsed");
      for (std::size_t i = 0; i < psi_grid.size(); ++i) {
        s.z[i] = 1.0;
        s.u[i] = 0.5 * std::log(phi2);
      }
      break;
    }
  }
  return s;
}

int sign_change_count(std::span<const double> f, double floor_rel) {
  double mx = 0.0;
  for (double v : f) mx = std::max(mx, std::abs(v));
  const double floor = floor_rel * mx;
  int count = 0;
  double prev = 0.0;
  for (double v : f) {
    if (std::abs(v) <= floor) continue;
    if (prev != 0.0 && v * prev < 0.0) ++count;
    prev = v;
  }
  return count;
}

}  // namespace warpflow
