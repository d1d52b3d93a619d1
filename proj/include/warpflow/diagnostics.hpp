#pragma once

#include "warpflow/initial_data.hpp"

namespace warpflow {

// Time series accumulated along an evolution.
struct DiagnosticsRecord {
  std::vector<double> times;
  std::vector<double> max_abs_rm;
  std::vector<double> max_abs_r;
  std::vector<int> sign_count;
  std::vector<double> grad_phi_max, grad_psi_max;
  std::vector<double> min_phi2, max_phi2;
  std::vector<std::vector<double>> mode_amps;  // per time: projection entries
  std::map<std::string, double> fitted_exponents;

  void append_time(double t);
  bool sign_count_nonincreasing() const;
};

// Projection of the localized fields onto the slower modes:
//   < chi U, U_{lam_j} >            for j = 0..k-1
//   < chi Z - e^{B^2 lam_k tau} Z_{lam_k}, Z_{h_j} >  for j = 0..K
std::vector<double> projection_vector(const Spectrum& spec, const PerturbationFields& f, int k,
                                      int K, int quad_nodes = 160);

// Power-law fit max|Rm| ~ C (T - t)^{-e} by log-space Gauss-Newton over
// (log C, e, T); T is seeded by Richardson extrapolation of 1/max|Rm|^{1/2}.
struct BlowupFit {
  double T = 0;
  double exponent = 0;
  double stderr_exponent = 0;
  bool type_I = false;  // (T-t) max|Rm| bounded over the window
  bool ok = false;
  std::string message;
};

BlowupFit fit_blowup(std::span<const double> times, std::span<const double> max_rm);

// Pole sectional-curvature lower bound against the actual value:
//   (1 - phi_s^2)/phi^2 |_pole = e^tau e^{-2 U(0, tau)}
//     >= e^tau (B^2/A^2) Upsilon_U^{-2} e^{2 alpha_k tau} e^{-2 U(Y_U e^{-a tau})}
struct PoleCurvatureBound {
  double actual = 0;
  double lower_bound = 0;
};
PoleCurvatureBound pole_curvature_lower(const Spectrum& spec, int k, const RescaledProfile& r,
                                        double Upsilon_U);

// Section-9 overlap: exact scalar curvature of the ansatz
//   z = B^2 + d psi^a, u = log(A psi / B) + c psi^a  (p = q = 5, a = -3)
// against the printed leading expression, tabulated over Upsilon.
struct ScalarOverlapRow {
  double Upsilon = 0;
  double R_exact = 0;
  double R_printed = 0;
  double ratio = 0;
};
struct ScalarOverlapTable {
  std::vector<ScalarOverlapRow> rows;
  double taylor_defect = 0;  // |(-36c^3+4c^2 y^3+6c y^6+3(taylor) y^9) - (-40c^3+10c^2 y^3)|
};
ScalarOverlapTable scalar_overlap_check(const ConeParams& cone, double c_tilde,
                                        std::span<const double> Upsilons, double tau, int k);
// coupling relation -d (a-2)(n+a-1) = -4 p B^2 a c for the ansatz pair
double overlap_coupled_d(const ConeParams& cone, double c_coef);

// sup over the record of (T - t) max|R|
double typeI_scalar_monitor(const DiagnosticsRecord& rec, double T);

struct ModeRateFit {
  std::vector<double> rates;   // fitted d log|amp| / d tau per mode
  std::vector<double> finals;  // last amplitudes
};
// log-amplitude regression of the projection entries over tau
ModeRateFit mode_decay_fit(std::span<const double> taus,
                           const std::vector<std::vector<double>>& amps,
                           double noise_floor = 1e-14);

}  // namespace warpflow
