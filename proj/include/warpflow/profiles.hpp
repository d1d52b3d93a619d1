#pragma once

#include <optional>
#include <string>
#include <vector>

#include "warpflow/cone.hpp"

namespace warpflow {

// Metric g = chi^2 dx^2 + phi^2 g_{S^p} + psi^2 g_{S^q}, x in (-1, 1).
// A profile may cover the full manifold or a window of it; `has_left_pole`
// marks that the first node is a smooth pole (psi = 0, psi_s = 1).
struct WarpedProfile {
  ConeParams cone;
  std::vector<double> x;
  std::vector<double> chi, phi, psi;
  double t = 0.0;
  bool has_left_pole = false;
  bool reflection_symmetric = false;  // fields even in x about x = 0

  // arc length s(x) with s = 0 at the first node (ds = chi dx, trapezoid)
  std::vector<double> arc_length() const;
};

// Sideways chart: psi is the coordinate, z = psi_s^2, u = log phi.
struct SidewaysProfile {
  ConeParams cone;
  std::vector<double> psi;
  std::vector<double> z, u;
  double t = 0.0;
};

// Parabolically rescaled sideways chart: gamma = e^{tau/2} psi,
// Z(gamma,tau) = z, U = u + tau/2, tau = -log(T - t).
struct RescaledProfile {
  ConeParams cone;
  std::vector<double> gamma;
  std::vector<double> Z, U;
  double tau = 0.0;
  double T = 0.0;

  double Ztilde(std::size_t i) const { return Z[i] - cone.B2(); }
  double Utilde(std::size_t i) const {
    return U[i] - std::log(cone.A / cone.B * gamma[i]);
  }
};

enum class Half { left, right };

// Resample (z, u) on a psi grid from a warped profile; requires psi strictly
// monotone on the selected half (checked). Monotone cubic resampling.
SidewaysProfile to_sideways(const WarpedProfile& w, Half half, std::size_t n_psi = 0);

// Inverse of to_sideways up to interpolation error: rebuild (s, phi, psi) from
// (z, u) integrating ds = dpsi / sqrt(z); chi == 1 (arc-length gauge).
WarpedProfile from_sideways(const SidewaysProfile& s, bool left_pole = false);

RescaledProfile to_rescaled(const SidewaysProfile& s, double T);
SidewaysProfile from_rescaled(const RescaledProfile& r);

enum class SpecialKind { rfc, sine_cone, cylinder };

struct SpecialParams {
  double lambda0 = 1.0;  // sine cone scale at t = 0
  double u0 = 0.0;       // cylinder: log phi at t = 0
};

// Closed-form solutions sampled on the given psi grid.
//  rfc:       z = B^2,               u = log(A psi / B)        (stationary)
//  sine_cone: z = B^2 - psi^2/l(t)^2, u = log(A psi / B),  l(t)^2 = l0^2 - 2(p+q) t
//  cylinder:  z = 1, u = log phi(t),  phi(t)^2 = e^{2 u0} - 2(p-1) t
SidewaysProfile special_solution(const ConeParams& c, SpecialKind kind, const SpecialParams& sp,
                                 double t, const std::vector<double>& psi_grid);

double sine_cone_lambda2(const ConeParams& c, double lambda0, double t);

// Number of sign changes of `f` along the grid, ignoring entries with
// |f| < floor_rel * max|f|.
int sign_change_count(std::span<const double> f, double floor_rel = 1e-10);

}  // namespace warpflow
