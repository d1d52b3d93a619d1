#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "warpflow/flow.hpp"
#include "warpflow/spectral.hpp"

namespace warpflow {

// Scales and tolerances defining the matched-asymptotics regions.
struct RegionParams {
  double Upsilon_U = 1e3;
  double Upsilon_Z = 1e5;
  double Upsilon_bar = 50.0;
  double M = 1.0;
  double alpha = 0.0;      // inner rate exponent alpha_k
  double beta = 0.4;       // cutoff/outer growth exponent
  double beta_bar = 0.45;  // initial-data outer exponent
  double tau0 = 40.0;
  double tau1 = 45.0;
  std::array<double, 6> eta = {1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3};  // U0,U1,U2,Z0,Z1,Z2
  std::map<std::string, double> D_consts;

  void validate() const;
  static RegionParams reference(const Spectrum& spec, int k);
};

// Constants feeding the inner-far barrier lemmas; q >= 10 required.
struct BarrierConstants {
  double a = 0, b = 0, c = 0, kappa = 0, eps = 0, l = 0;
};

// Base values per the remark's recipe with the deltas auto-tuned by halving
// until all inequality constraints of the two far-barrier lemmas hold.
BarrierConstants constants_to_use(int p, int q, int k);

struct SamplePoint {
  double x = 0;   // gamma, xi or psi
  double tau = 0; // tau or t
};

struct BarrierReport {
  std::string lemma;
  std::map<std::string, double> params;
  int n_space = 0, n_tau = 0;
  int required_sign = +1;                 // +1 sub (residual >= 0), -1 super
  double min_residual = 0, max_residual = 0;
  double violation_fraction = 0;
  SamplePoint worst;
  std::map<std::string, double> coefficient_checks;  // closed-form inequalities
  bool coefficients_ok = true;

  bool pass() const { return violation_fraction == 0.0 && coefficients_ok; }
};

struct SampleGrid {
  double x_lo = 0, x_hi = 0;  // log-uniform in space
  double tau_lo = 0, tau_hi = 0;
  int n_space = 200, n_tau = 50;
};

// closed-form candidate with analytic derivatives, for the transcription
// cross-checks and the report samplers
struct Candidate {
  std::function<double(double x, double tau)> val, d1, d2, dtau;
};

// Lemma checkers. Each evaluates the displayed differential inequality of its
// lemma with ambient coefficients at their adversarial ends, and reports the
// residual sign statistics over a tensor sample grid.
BarrierReport inner_cone_barrier_u(const ConeParams& cone, double c_slope, const SampleGrid& g);
BarrierReport inner_cone_barrier_z(const ConeParams& cone, double c_level, const SampleGrid& g);
BarrierReport inner_grad_barrier_u(const ConeParams& cone, const SampleGrid& g);
BarrierReport inner_second_deriv_sign(const ConeParams& cone, const SampleGrid& g);

BarrierReport xi_far_barrier_u_weak(const Spectrum& spec, int k, const BarrierConstants& bc,
                                    double C0, double Upsilon, double tau0, const SampleGrid& g);
BarrierReport xi_far_barrier_z(const Spectrum& spec, int k, const BarrierConstants& bc, double C0,
                               double D0, double M_int, double Upsilon, double tau0,
                               const SampleGrid& g);
BarrierReport xi_far_barrier_u(const Spectrum& spec, int k, const BarrierConstants& bc, double C1,
                               double D0, double U_bar, double Upsilon, double tau0,
                               const SampleGrid& g);
BarrierReport inner_parab_extend_z(const Spectrum& spec, int k, double C_u, double eta_u,
                                   double D_minus, double D_plus, double Upsilon_U,
                                   double Upsilon_Z, double tau0, const SampleGrid& g);

enum class ParabOuterKind { U_lower, U_upper, Z_upper, Z_lower };
BarrierReport parab_outer_barrier(const Spectrum& spec, int k, ParabOuterKind kind, double C,
                                  double D, double C_U, double Gamma, double rho, double eps_z,
                                  double tau0, const SampleGrid& g);

struct SineConeBarrier {
  std::vector<double> psi;
  std::vector<double> z_minus;
  double psi_star = 0;  // lower bound for the first zero of z
  double K_t = 0;
};
SineConeBarrier sine_cone_barrier(const ConeParams& cone, double C, double K0, double t,
                                  const std::vector<double>& psi_grid);
// exact-equality property of the proof: F^l + F^q - 2pC^2 z^2/psi^2 == dz/dt
// on the positive branch; returns the max absolute defect over samples
double sine_cone_barrier_equality_defect(const ConeParams& cone, double C, double K0, double t,
                                         const std::vector<double>& psi_grid);

// ---------------------------------------------------------------------------
// Membership of trajectory samples in the region sets.
// ---------------------------------------------------------------------------

enum class RegionSet { B, I, O, P };

struct MembershipItem {
  std::string name;
  double max_violation = 0;  // > 0 means the inequality failed by this much
  double margin = 0;         // smallest slack over all samples
  SamplePoint worst;
  bool pass = true;
};

struct MembershipReport {
  std::vector<MembershipItem> items;
  bool all_pass = true;
};

// Fields sampled at a sequence of tau values; D-constants and set-specific
// parameters are read from region.D_consts (see the checker for keys).
MembershipReport membership_check(const std::vector<PerturbationFields>& samples,
                                  const Spectrum& spec, int k, const RegionParams& region,
                                  RegionSet which,
                                  const std::function<double(double, double)>& rm_field = nullptr);

// generic operator assemblers used by the transcription cross-checks
double op_rescaled_u(const ConeParams& cone, const Candidate& cand, double Zval, double g,
                     double tau);
double op_rescaled_z(const ConeParams& cone, const Candidate& cand, double Ugrad, double g,
                     double tau);

}  // namespace warpflow
