#pragma once

#include "warpflow/profiles.hpp"

namespace warpflow {

// The five sectional-curvature generators in sideways variables:
//   l = (1-z)/psi^2          = (1 - psi_s^2)/psi^2
//   k = -z_psi/(2 psi)       = -psi_ss/psi
//   j = e^{-2u} - z u_psi^2  = (1 - phi_s^2)/phi^2
//   h = -z u_pp - z u_p^2 - u_p z_p / 2 = -phi_ss/phi
//   m = -(z/psi) u_psi       = -phi_s psi_s/(phi psi)
struct SectionalGenerators {
  double l = 0, k = 0, j = 0, h = 0, m = 0;

  double max_abs() const;  // |Rm| proxy: max |.| over the five generators
};

// Precomputed derivative stencils for a sideways profile grid.
class SidewaysGeometry {
 public:
  explicit SidewaysGeometry(const SidewaysProfile& s);

  SectionalGenerators generators(std::size_t i) const;
  double scalar_curvature(std::size_t i) const;
  double max_abs_rm() const;    // over interior nodes
  double max_abs_r() const;

  std::size_t size() const { return prof_->psi.size(); }

 private:
  const SidewaysProfile* prof_;
  GridDerivative d_;
  std::vector<double> z1_, z2_, u1_, u2_;
};

SectionalGenerators sectional_generators(const SidewaysProfile& s, std::size_t i);
double scalar_curvature(const SidewaysProfile& s, std::size_t i);

// Sectional generators from closed-form local data (no grid): used by
// residual checkers and the section-9 overlap diagnostics.
SectionalGenerators sectional_generators_pointwise(const ConeParams& c, double psi, double z,
                                                   double z_p, double u, double u_p, double u_pp);
double scalar_curvature_pointwise(const ConeParams& c, double psi, double z, double z_p, double u,
                                  double u_p, double u_pp);

// Ricci tensor components of a warped profile at node i, as the three brackets
// multiplying ds^2, phi^2 g_{S^p}, psi^2 g_{S^q}.
struct RicciComponents {
  double rr = 0;    // -(p phi_ss/phi + q psi_ss/psi)
  double pphi = 0;  // -phi_ss/phi + (p-1)(1-phi_s^2)/phi^2 - q phi_s psi_s/(phi psi)
  double ppsi = 0;  // -psi_ss/psi + (q-1)(1-psi_s^2)/psi^2 - p phi_s psi_s/(phi psi)
};

RicciComponents ricci_components(const WarpedProfile& w, std::size_t i);

}  // namespace warpflow
