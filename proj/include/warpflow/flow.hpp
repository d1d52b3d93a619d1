#pragma once

#include <functional>
#include <optional>
#include <string>

#include "warpflow/geometry.hpp"
#include "warpflow/profiles.hpp"

namespace warpflow {

enum class Scheme { explicit_rk4, imex };

struct StepperConfig {
  double dt_init = 1e-4;
  double cfl_safety = 0.8;     // in (0,1)
  double tol = 1e-8;           // step-doubling error tolerance (relative)
  int max_substeps = 50000000;
  Scheme scheme = Scheme::explicit_rk4;
  int adapt_interval = 25;     // steps between step-doubling checks
  double checkpoint_every = 0; // 0: only first/last
  int pole_collar = 0;         // slaved nodes at a smooth pole; 0 = heuristic

  void validate() const;
};

enum class EvolveStatus { ok, stiffness_failure, blowup_detected, step_limit };

const char* to_string(EvolveStatus s);

// Localized perturbation fields (Ztilde, Utilde) with the collar cutoff.
struct PerturbationFields {
  ConeParams cone;
  std::vector<double> gamma;
  std::vector<double> Ztilde, Utilde;
  double tau = 0.0;
  double M = 1.0;    // cutoff plateau scale
  double beta = 0.4; // cutoff growth exponent

  double cutoff(double g) const;        // chi: 1 below M e^{beta tau}, 0 above +1
  double cutoff_d1(double g) const;
  double cutoff_d2(double g) const;
  double cutoff_dtau(double g) const;
  double collar_lo() const;             // M e^{beta tau}
};

// ---------------------------------------------------------------------------
// Right-hand sides. Interior nodes use the module's stencils; pole closures
// are L'Hopital limits; a window's edge values are owned by the caller's
// boundary conditions and their returned rates are not meaningful.
// ---------------------------------------------------------------------------

struct ArclengthRates {
  std::vector<double> chi_t, phi_t, psi_t;
};
// d/dt at fixed x of (chi, phi, psi); `left_pole` marks psi = 0 at the first
// node, `right_equator` marks reflection symmetry about the last node.
ArclengthRates rhs_arclength(const WarpedProfile& w);

struct SidewaysRates {
  std::vector<double> z_t, u_t;
};
SidewaysRates rhs_sideways(const SidewaysProfile& s, bool pole_at_zero = false);

struct RescaledRates {
  std::vector<double> Z_tau, U_tau;
};
// Full psRF right-hand side including the -g/2 drift and the +1/2 source.
// `drift_only` disables the F/E terms (method-of-characteristics check).
RescaledRates rhs_rescaled(const RescaledProfile& r, bool drift_only = false);

struct PerturbationRates {
  std::vector<double> Zt_tau, Ut_tau;
};
// ppsRF: d/dtau Zt = B^2 D_Z Zt + B^2 N Ut + Err_Z, d/dtau Ut = B^2 D_U Ut + Err_U.
PerturbationRates rhs_perturbation(const PerturbationFields& f, bool include_err);

// Pointwise error terms (exact change-of-variables remainders).
double err_z_pointwise(const ConeParams& c, double g, double Zt, double Zt1, double Zt2,
                       double Ut1);
double err_u_pointwise(const ConeParams& c, double g, double Zt, double Ut, double Ut1,
                       double Ut2);

// Collar contributions B^2 [chi, D].  + chi_tau . for the localized fields;
// identically zero off the collar.
struct CommutatorTerms {
  std::vector<double> for_Z, for_U;
};
CommutatorTerms commutator_terms(const PerturbationFields& f);

// ---------------------------------------------------------------------------
// Time integration (method of lines, adaptive RK4 or IMEX-CN).
// ---------------------------------------------------------------------------

// Per-step monitor callback; `t` is the evolved time variable (t or tau).
using MonitorFn = std::function<void(double t, const std::vector<double>& state)>;

// Dirichlet edge updater: given time, overwrite the edge values of the state.
using EdgeFn = std::function<void(double t, std::vector<double>& state)>;

struct EvolveOutcome {
  EvolveStatus status = EvolveStatus::ok;
  double t_final = 0.0;
  int steps = 0;
  int rejected = 0;
  std::vector<double> dt_history;  // sampled at checkpoints
  std::string message;
};

struct SidewaysTrajectory {
  EvolveOutcome outcome;
  std::vector<SidewaysProfile> checkpoints;
};
SidewaysTrajectory evolve_sideways(SidewaysProfile s, const StepperConfig& cfg, double t_end,
                                   const EdgeFn& bc = nullptr, bool pole_at_zero = false,
                                   const MonitorFn& monitor = nullptr);

struct RescaledTrajectory {
  EvolveOutcome outcome;
  std::vector<RescaledProfile> checkpoints;
};
RescaledTrajectory evolve_rescaled(RescaledProfile r, const StepperConfig& cfg, double tau_end,
                                   const EdgeFn& bc = nullptr, const MonitorFn& monitor = nullptr);

struct PerturbationTrajectory {
  EvolveOutcome outcome;
  std::vector<PerturbationFields> checkpoints;
};
PerturbationTrajectory evolve_perturbation(PerturbationFields f, const StepperConfig& cfg,
                                           double tau_end, bool include_err,
                                           const EdgeFn& bc = nullptr,
                                           const MonitorFn& monitor = nullptr);

struct WarpedTrajectory {
  EvolveOutcome outcome;
  std::vector<WarpedProfile> checkpoints;
};
// Full-manifold (or half-manifold with equator symmetry) arclength evolution;
// parity ghost closures at the pole and, when `reflection`, at the last node.
WarpedTrajectory evolve_arclength(WarpedProfile w, const StepperConfig& cfg, double t_end,
                                  const MonitorFn& monitor = nullptr);

}  // namespace warpflow
