#include "warpflow/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace warpflow {

double SectionalGenerators::max_abs() const {
  return std::max({std::abs(l), std::abs(k), std::abs(j), std::abs(h), std::abs(m)});
}

SectionalGenerators sectional_generators_pointwise(const ConeParams& c, double psi, double z,
                                                   double z_p, double u, double u_p, double u_pp) {
  (void)c;
  SectionalGenerators g;
  g.l = (1.0 - z) / (psi * psi);
  g.k = -z_p / (2.0 * psi);
  g.j = std::exp(-2.0 * u) - z * u_p * u_p;
  g.h = -z * u_pp - z * u_p * u_p - u_p * z_p / 2.0;
  g.m = -(z / psi) * u_p;
  return g;
}

double scalar_curvature_pointwise(const ConeParams& c, double psi, double z, double z_p, double u,
                                  double u_p, double u_pp) {
  const auto g = sectional_generators_pointwise(c, psi, z, z_p, u, u_p, u_pp);
  const double p = c.p, q = c.q;
  return 2.0 * p * g.h + 2.0 * q * g.k + p * (p - 1.0) * g.j + q * (q - 1.0) * g.l +
         2.0 * p * q * g.m;
}

SidewaysGeometry::SidewaysGeometry(const SidewaysProfile& s) : prof_(&s), d_(s.psi) {
  z1_ = d_.deriv_all(s.z, 1);
  z2_ = d_.deriv_all(s.z, 2);
  u1_ = d_.deriv_all(s.u, 1);
  u2_ = d_.deriv_all(s.u, 2);
}

SectionalGenerators SidewaysGeometry::generators(std::size_t i) const {
  require(prof_->z[i] > 0.0, "generators: z must be positive");
  return sectional_generators_pointwise(prof_->cone, prof_->psi[i], prof_->z[i], z1_[i],
                                        prof_->u[i], u1_[i], u2_[i]);
}

double SidewaysGeometry::scalar_curvature(std::size_t i) const {
  return scalar_curvature_pointwise(prof_->cone, prof_->psi[i], prof_->z[i], z1_[i], prof_->u[i],
                                    u1_[i], u2_[i]);
}

double SidewaysGeometry::max_abs_rm() const {
  double mx = 0.0;
  for (std::size_t i = 2; i + 2 < size(); ++i) mx = std::max(mx, generators(i).max_abs());
  return mx;
}

double SidewaysGeometry::max_abs_r() const {
  double mx = 0.0;
  for (std::size_t i = 2; i + 2 < size(); ++i) mx = std::max(mx, std::abs(scalar_curvature(i)));
  return mx;
}

SectionalGenerators sectional_generators(const SidewaysProfile& s, std::size_t i) {
  require(i >= 2 && i + 2 < s.psi.size(), "sectional_generators: needs one-sided closure at boundary");
  SidewaysGeometry geo(s);
  return geo.generators(i);
}

double scalar_curvature(const SidewaysProfile& s, std::size_t i) {
  require(i >= 2 && i + 2 < s.psi.size(), "scalar_curvature: needs one-sided closure at boundary");
  SidewaysGeometry geo(s);
  return geo.scalar_curvature(i);
}

RicciComponents ricci_components(const WarpedProfile& w, std::size_t i) {
  const auto s = w.arc_length();
  GridDerivative d(s);
  const double phi_s = d.deriv(w.phi, i, 1);
  const double phi_ss = d.deriv(w.phi, i, 2);
  const double psi_s = d.deriv(w.psi, i, 1);
  const double psi_ss = d.deriv(w.psi, i, 2);
  const double p = w.cone.p, q = w.cone.q;
  const double phi = w.phi[i], psi = w.psi[i];
  require(phi > 0.0 && psi > 0.0, "ricci_components: interior point required");
  RicciComponents r;
  r.rr = -(p * phi_ss / phi + q * psi_ss / psi);
  r.pphi = -phi_ss / phi + (p - 1.0) * (1.0 - phi_s * phi_s) / (phi * phi) -
           q * phi_s * psi_s / (phi * psi);
  r.ppsi = -psi_ss / psi + (q - 1.0) * (1.0 - psi_s * psi_s) / (psi * psi) -
           p * phi_s * psi_s / (phi * psi);
  return r;
}

}  // namespace warpflow
