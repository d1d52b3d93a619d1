#pragma once

#include "warpflow/barriers.hpp"

namespace warpflow {

// Mode amplitudes of the initial perturbation: p_vec for the U-modes below k,
// q_vec for the Z-modes up to K where h_{K+1} < lambda_k < h_K.
struct ModeCoefficients {
  std::vector<double> p_vec;
  std::vector<double> q_vec;
  int k = 4;
  int K = 0;
  double eps0 = 0.1;

  double norm() const;
};

// K from the eigenvalue interlacing; throws when lambda_k sits above h_0.
int interlacing_K(const Spectrum& spec, int k);

// Perturbation-of-cone data on the parabolic window:
//   U = sum_j p_j U_{lam_j} + e^{B^2 lam_k tau0} U_{lam_k}
//   Z = sum_j q_j Z_{h_j} + e^{B^2 lam_k tau0} Z_{lam_k}
void parabolic_block(const Spectrum& spec, const ModeCoefficients& mc, double tau0,
                     std::span<const double> gamma, std::span<double> Ztilde,
                     std::span<double> Utilde);

// Inner extension on (0, gamma_b]: chooses the source profile f >= 0 with
//   int_0^{gamma_b} g f = 1 + gamma_b U_gamma(gamma_b),
// value/derivative-matched at the interface, and solves u_gg + u_g/g = f
// inward in closed form. Provides the Z extension capping the cone smoothly.
struct InnerExtension {
  double gamma_b = 0;
  double a0 = 0, alpha2 = 0, alpha4 = 0;  // f-profile coefficients (eta units)
  double U_b = 0, dU_b = 0;
  double Z_b = 0, dZ_b = 0, d2Z_b = 0;
  double zA = 0, zB = 0, zC = 0;  // Z tail-match coefficients
  double sup_g2f = 0;             // sup |gamma^2 f|, reported
  double integral_defect = 0;     // should be ~0 by construction
  double B2 = 0;

  double f_of(double gamma) const;        // the chosen source profile
  double gammaU_gamma(double gamma) const;  // = -1 + int_0^g s f(s) ds
  double U_of(double gamma) const;
  double U_limit_at_pole() const;         // lim (log gamma + U) offset... see impl
  double Z_of(double gamma) const;
  double Z_d1(double gamma) const;
};

InnerExtension inner_extension(const Spectrum& spec, const ModeCoefficients& mc,
                               const RegionParams& region, double tau0);

// Outer extension through the equator in arc length.
struct OuterExtension {
  double psi_if = 0;   // interface radius M e^{beta_bar tau0 - tau0/2}
  double psi_star = 0; // end of the sideways branch (z^-'s zero)
  double s_if = 0, s_star = 0, s_equator = 0;
  double D0 = 1.0, D1 = 0.01;
  double D2_measured = 0;  // sup |Rm| e^{-tau0} over the outer samples
  double K_tilde = 0;
  double z0_outer = 0;
  std::vector<double> s;      // outer s-grid from s_if to the equator
  std::vector<double> psi, z, phi;
};

OuterExtension outer_extension(const Spectrum& spec, const RegionParams& region, double tau0,
                               double T, double psi_if, double z_if, double u_if, double du_if,
                               double s_if);

struct AssembleResult {
  WarpedProfile profile;      // half manifold, pole at x = -1, equator at x = 0
  PerturbationFields fields;  // rescaled perturbation view of the sideways part
  MembershipReport memb_I, memb_B, memb_O;
  InnerExtension inner;
  OuterExtension outer;
  double T = 1.0;
  bool all_pass() const { return memb_I.all_pass && memb_B.all_pass && memb_O.all_pass; }
};

// Build the initial metric for the given coefficients and verify membership.
// k must be even (the construction needs the mode's inner boundary constant
// positive). T fixes the singular-time normalization tau = -log(T - t).
AssembleResult assemble(const Spectrum& spec, const ModeCoefficients& mc,
                        const RegionParams& region, double T = 1.0);

// Projection of assembled (or evolved) fields back onto the modes: entries
// <U, U_{lam_j}> for j < k, then <Z - e^{B^2 lam_k tau} Z_{lam_k}, Z_{h_j}>
// for j <= K, and finally the recovered k-mode amplitude <U, U_{lam_k}>.
std::vector<double> project_mode_amplitudes(const Spectrum& spec, const PerturbationFields& f,
                                            int k, int K, int quad_nodes = 160);

}  // namespace warpflow
