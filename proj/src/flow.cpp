#include "warpflow/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace warpflow {

void StepperConfig::validate() const {
  require(cfl_safety > 0.0 && cfl_safety < 1.0, "StepperConfig: cfl_safety in (0,1)");
  require(dt_init > 0.0 && tol > 0.0, "StepperConfig: positive tolerances");
  require(max_substeps > 0, "StepperConfig: max_substeps > 0");
}

const char* to_string(EvolveStatus s) {
  switch (s) {
    case EvolveStatus::ok: return "ok";
    case EvolveStatus::stiffness_failure: return "stiffness failure";
    case EvolveStatus::blowup_detected: return "blow-up or instability detected";
    case EvolveStatus::step_limit: return "step limit reached";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// cutoff
// ---------------------------------------------------------------------------

double PerturbationFields::collar_lo() const { return M * std::exp(beta * tau); }
double PerturbationFields::cutoff(double g) const { return SmoothBump::value(g - collar_lo()); }
double PerturbationFields::cutoff_d1(double g) const { return SmoothBump::d1(g - collar_lo()); }
double PerturbationFields::cutoff_d2(double g) const { return SmoothBump::d2(g - collar_lo()); }
double PerturbationFields::cutoff_dtau(double g) const {
  return -SmoothBump::d1(g - collar_lo()) * M * beta * std::exp(beta * tau);
}

// ---------------------------------------------------------------------------
// pointwise error terms (exact remainders of the change of variables)
// ---------------------------------------------------------------------------

double err_z_pointwise(const ConeParams& c, double g, double Zt, double Zt1, double Zt2,
                       double Ut1) {
  const double B2 = c.B2();
  const double q1 = c.q - 1.0;
  const double quad = Zt * Zt2 - 0.5 * Zt1 * Zt1 - Zt * Zt1 / g - 2.0 * q1 * Zt * Zt / (g * g);
  const double brace = B2 * B2 * Ut1 * Ut1 + 4.0 * B2 / g * Zt * Ut1 + 2.0 * B2 * Zt * Ut1 * Ut1 +
                       Zt * Zt / (g * g) + 2.0 / g * Zt * Zt * Ut1 + Zt * Zt * Ut1 * Ut1;
  return quad - 2.0 * c.p * brace;
}

double err_u_pointwise(const ConeParams& c, double g, double Zt, double Ut, double Ut1,
                       double Ut2) {
  // exact remainder carries q-1 = B^2 (n-1) on the exponential term
  const double q1 = c.q - 1.0;
  return Zt * Ut2 + Zt / g * Ut1 + q1 / (g * g) * (1.0 - std::exp(-2.0 * Ut) - 2.0 * Ut);
}

// ---------------------------------------------------------------------------
// right-hand sides
// ---------------------------------------------------------------------------

namespace {

struct SidewaysStencil {
  GridDerivative d;
  explicit SidewaysStencil(const std::vector<double>& nodes) : d(nodes) {}
};

void sideways_rates_impl(const ConeParams& c, const GridDerivative& d,
                         std::span<const double> psi, std::span<const double> z,
                         std::span<const double> u, bool pole_at_zero, bool rescaled, double* z_t,
                         double* u_t) {
  // rescaled: fields are (Z, U)(gamma); adds the -g/2 drift and +1/2 source.
  const double p = c.p, q = c.q;
  const std::size_t n = psi.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ps = psi[i];
    const double zi = z[i], ui = u[i];
    const double z1 = d.deriv(z, i, 1), z2 = d.deriv(z, i, 2);
    const double u1 = d.deriv(u, i, 1), u2 = d.deriv(u, i, 2);
    if (pole_at_zero && i == 0) {
      z_t[i] = 0.0;
      u_t[i] = (2.0 * zi + q - 1.0) * u2 - (p - 1.0) * std::exp(-2.0 * ui) +
               (rescaled ? 0.5 : 0.0);
      continue;
    }
    if (zi <= 0.0) throw std::domain_error("rhs_sideways: degenerate metric (z <= 0)");
    double zr = zi * z2 + z1 * ((q - 1.0) / ps - zi / ps) - 0.5 * z1 * z1 +
                2.0 * (q - 1.0) / (ps * ps) * zi * (1.0 - zi) - 2.0 * p * zi * zi * u1 * u1;
    double ur = zi * u2 + u1 * (zi + q - 1.0) / ps - (p - 1.0) * std::exp(-2.0 * ui);
    if (rescaled) {
      zr -= 0.5 * ps * z1;
      ur += -0.5 * ps * u1 + 0.5;
    }
    z_t[i] = zr;
    u_t[i] = ur;
  }
}

}  // namespace

SidewaysRates rhs_sideways(const SidewaysProfile& s, bool pole_at_zero) {
  SidewaysRates r;
  r.z_t.resize(s.psi.size());
  r.u_t.resize(s.psi.size());
  GridDerivative d(s.psi);
  sideways_rates_impl(s.cone, d, s.psi, s.z, s.u, pole_at_zero, false, r.z_t.data(), r.u_t.data());
  return r;
}

RescaledRates rhs_rescaled(const RescaledProfile& r, bool drift_only) {
  RescaledRates out;
  const std::size_t n = r.gamma.size();
  out.Z_tau.resize(n);
  out.U_tau.resize(n);
  GridDerivative d(r.gamma);
  if (drift_only) {
    for (std::size_t i = 0; i < n; ++i) {
      out.Z_tau[i] = -0.5 * r.gamma[i] * d.deriv(r.Z, i, 1);
      out.U_tau[i] = -0.5 * r.gamma[i] * d.deriv(r.U, i, 1) + 0.5;
    }
    return out;
  }
  sideways_rates_impl(r.cone, d, r.gamma, r.Z, r.U, false, true, out.Z_tau.data(),
                      out.U_tau.data());
  return out;
}

namespace {

void perturbation_rates_impl(const ConeParams& c, const GridDerivative& d,
                             std::span<const double> gamma, std::span<const double> Zt,
                             std::span<const double> Ut, bool include_err, double* dZ,
                             double* dU) {
  const double B2 = c.B2();
  const double n = c.n, p = c.p;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    const double Z1 = d.deriv(Zt, i, 1), Z2 = d.deriv(Zt, i, 2);
    const double U1 = d.deriv(Ut, i, 1), U2 = d.deriv(Ut, i, 2);
    const double DZ = Z2 + ((n - 2.0) / g - g / (2.0 * B2)) * Z1 - 2.0 * (n - 1.0) / (g * g) * Zt[i];
    const double DU = U2 + (n / g - g / (2.0 * B2)) * U1 + 2.0 * (n - 1.0) / (g * g) * Ut[i];
    const double NU = -(4.0 * p * B2 / g) * U1;
    double rz = B2 * DZ + B2 * NU;
    double ru = B2 * DU;
    if (include_err) {
      rz += err_z_pointwise(c, g, Zt[i], Z1, Z2, U1);
      ru += err_u_pointwise(c, g, Zt[i], Ut[i], U1, U2);
    }
    dZ[i] = rz;
    dU[i] = ru;
  }
}

}  // namespace

PerturbationRates rhs_perturbation(const PerturbationFields& f, bool include_err) {
  for (double v : f.Ztilde) require(std::isfinite(v), "rhs_perturbation: non-finite field");
  for (double v : f.Utilde) require(std::isfinite(v), "rhs_perturbation: non-finite field");
  PerturbationRates out;
  out.Zt_tau.resize(f.gamma.size());
  out.Ut_tau.resize(f.gamma.size());
  GridDerivative d(f.gamma);
  perturbation_rates_impl(f.cone, d, f.gamma, f.Ztilde, f.Utilde, include_err, out.Zt_tau.data(),
                          out.Ut_tau.data());
  return out;
}

CommutatorTerms commutator_terms(const PerturbationFields& f) {
  const ConeParams& c = f.cone;
  const double B2 = c.B2(), n = c.n;
  CommutatorTerms out;
  out.for_Z.assign(f.gamma.size(), 0.0);
  out.for_U.assign(f.gamma.size(), 0.0);
  GridDerivative d(f.gamma);
  const double lo = f.collar_lo();
  for (std::size_t i = 0; i < f.gamma.size(); ++i) {
    const double g = f.gamma[i];
    if (g <= lo || g >= lo + 1.0) continue;  // supported only in the collar
    const double x1 = f.cutoff_d1(g), x2 = f.cutoff_d2(g), xt = f.cutoff_dtau(g);
    const double Z1 = d.deriv(f.Ztilde, i, 1);
    const double U1 = d.deriv(f.Utilde, i, 1);
    out.for_Z[i] = B2 * (x1 * (-2.0 * Z1 - f.Ztilde[i] * ((n - 2.0) / g - g / (2.0 * B2))) -
                         x2 * f.Ztilde[i]) +
                   xt * f.Ztilde[i];
    out.for_U[i] = B2 * (x1 * (-2.0 * U1 - f.Utilde[i] * (n / g - g / (2.0 * B2))) -
                         x2 * f.Utilde[i]) +
                   xt * f.Utilde[i];
  }
  return out;
}

ArclengthRates rhs_arclength(const WarpedProfile& w) {
  const std::size_t n = w.x.size();
  ArclengthRates out;
  out.chi_t.assign(n, 0.0);
  out.phi_t.assign(n, 0.0);
  out.psi_t.assign(n, 0.0);
  const double p = w.cone.p, q = w.cone.q;

  // parity ghost extension in x about the pole (and equator when symmetric)
  const int ng = 4;
  std::vector<double> xs, chi, phi, psi;
  std::size_t off = 0;
  auto push_mirror_front = [&](int count) {
    for (int k = count; k >= 1; --k) {
      xs.push_back(2.0 * w.x.front() - w.x[k]);
      chi.push_back(w.chi[k]);
      phi.push_back(w.phi[k]);
      psi.push_back(-w.psi[k]);  // psi odd about the pole
    }
    off = count;
  };
  if (w.has_left_pole) push_mirror_front(ng);
  xs.insert(xs.end(), w.x.begin(), w.x.end());
  chi.insert(chi.end(), w.chi.begin(), w.chi.end());
  phi.insert(phi.end(), w.phi.begin(), w.phi.end());
  psi.insert(psi.end(), w.psi.begin(), w.psi.end());
  if (w.reflection_symmetric) {
    const std::size_t m = w.x.size();
    for (int k = 1; k <= ng; ++k) {
      xs.push_back(2.0 * w.x.back() - w.x[m - 1 - k]);
      chi.push_back(w.chi[m - 1 - k]);
      phi.push_back(w.phi[m - 1 - k]);
      psi.push_back(w.psi[m - 1 - k]);  // even about the equator
    }
  }
  GridDerivative d(xs);

  auto s_derivs = [&](std::span<const double> fld, std::size_t i, double& fs, double& fss) {
    const double cx = d.deriv(chi, i, 1);
    const double f1 = d.deriv(fld, i, 1), f2 = d.deriv(fld, i, 2);
    const double ci = chi[i];
    fs = f1 / ci;
    fss = f2 / (ci * ci) - cx * f1 / (ci * ci * ci);
  };

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = j + off;
    const double ph = phi[i], ps = psi[i], ch = chi[i];
    double phs, phss, pss, psss2;
    s_derivs(phi, i, phs, phss);
    s_derivs(psi, i, pss, psss2);
    if (w.has_left_pole && j == 0) {
      // smooth pole: psi = 0, psi_s = 1, phi_s = 0
      out.psi_t[j] = 0.0;
      out.phi_t[j] = (1.0 + q) * phss - (p - 1.0) / ph;
      // psi_ss/psi -> psi_sss/psi_s
      auto wts = fd_weights(xs[i], std::span<const double>(xs.data() + i - 3, 7), 3);
      double f1 = 0, f2 = 0, f3 = 0, c1 = 0, c2 = 0;
      for (int a = 0; a < 7; ++a) {
        f1 += wts[1][a] * psi[i - 3 + a];
        f2 += wts[2][a] * psi[i - 3 + a];
        f3 += wts[3][a] * psi[i - 3 + a];
        c1 += wts[1][a] * chi[i - 3 + a];
        c2 += wts[2][a] * chi[i - 3 + a];
      }
      const double psi_sss = f3 / (ch * ch * ch) - 3.0 * c1 * f2 / std::pow(ch, 4) -
                             c2 * f1 / std::pow(ch, 4) + 3.0 * c1 * c1 * f1 / std::pow(ch, 5);
      const double psi_s = f1 / ch;
      out.chi_t[j] = ch * (p * phss / ph + q * psi_sss / psi_s);
      continue;
    }
    if (ph <= 0.0 || ps <= 0.0)
      throw std::domain_error("rhs_arclength: degenerate metric (phi or psi <= 0)");
    const double psi_s = pss, psi_ss = psss2;
    out.chi_t[j] = ch * (p * phss / ph + q * psi_ss / ps);
    out.phi_t[j] = phss - (p - 1.0) * (1.0 - phs * phs) / ph + q * phs * psi_s / ps;
    out.psi_t[j] = psi_ss - (q - 1.0) * (1.0 - psi_s * psi_s) / ps + p * phs * psi_s / ph;
  }
  return out;
}

// ---------------------------------------------------------------------------
// generic adaptive RK4 driver
// ---------------------------------------------------------------------------

namespace {

struct Ode {
  std::function<void(double, const std::vector<double>&, std::vector<double>&)> rhs;
  std::function<void(double, std::vector<double>&)> bc;  // optional
  std::function<bool(const std::vector<double>&)> valid;  // optional extra sanity
};

bool finite_all(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void rk4_step(const Ode& ode, double t, double dt, const std::vector<double>& y,
              std::vector<double>& out, std::vector<double>& k, std::vector<double>& tmp) {
  const std::size_t n = y.size();
  out = y;
  ode.rhs(t, y, k);
  for (std::size_t i = 0; i < n; ++i) out[i] += dt / 6.0 * k[i];
  tmp = y;
  for (std::size_t i = 0; i < n; ++i) tmp[i] += 0.5 * dt * k[i];
  if (ode.bc) ode.bc(t + 0.5 * dt, tmp);
  ode.rhs(t + 0.5 * dt, tmp, k);
  for (std::size_t i = 0; i < n; ++i) out[i] += dt / 3.0 * k[i];
  tmp = y;
  for (std::size_t i = 0; i < n; ++i) tmp[i] += 0.5 * dt * k[i];
  if (ode.bc) ode.bc(t + 0.5 * dt, tmp);
  ode.rhs(t + 0.5 * dt, tmp, k);
  for (std::size_t i = 0; i < n; ++i) out[i] += dt / 3.0 * k[i];
  tmp = y;
  for (std::size_t i = 0; i < n; ++i) tmp[i] += dt * k[i];
  if (ode.bc) ode.bc(t + dt, tmp);
  ode.rhs(t + dt, tmp, k);
  for (std::size_t i = 0; i < n; ++i) out[i] += dt / 6.0 * k[i];
  if (ode.bc) ode.bc(t + dt, out);
}

EvolveOutcome integrate_rk4(const Ode& ode, std::vector<double>& y, double t0, double t_end,
                            const StepperConfig& cfg, double dt_cap,
                            const std::function<void(double, const std::vector<double>&)>& on_step) {
  EvolveOutcome out;
  double t = t0;
  double dt = std::min(cfg.dt_init, dt_cap);
  std::vector<double> y1, y2, yh, k, tmp;
  int since_check = 0;
  const double dt_floor = std::max(1e-15 * std::abs(t_end - t0), 1e-300);
  if (ode.bc) ode.bc(t, y);
  while (t < t_end && out.steps < cfg.max_substeps) {
    const double step = std::min(dt, t_end - t);
    const bool check = (since_check >= cfg.adapt_interval) || out.steps == 0;
    bool accepted = false;
    bool threw = false;
    try {
      rk4_step(ode, t, step, y, y1, k, tmp);
      if (check) {
        rk4_step(ode, t, 0.5 * step, y, yh, k, tmp);
        rk4_step(ode, t + 0.5 * step, 0.5 * step, yh, y2, k, tmp);
      }
    } catch (const std::exception&) {
      threw = true;  // stage left the equations' domain: treat as instability
    }
    if (threw) {
      dt *= 0.5;
      ++out.rejected;
      since_check = cfg.adapt_interval;
      if (dt < dt_floor) {
        out.status = EvolveStatus::blowup_detected;
        out.message = "state left the equations' domain; returning last good state";
        out.t_final = t;
        return out;
      }
      continue;
    }
    if (check) {
      double err = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        err = std::max(err, std::abs(y1[i] - y2[i]));
        scale = std::max(scale, std::abs(y2[i]));
      }
      const double rel = err / std::max(scale, 1e-30);
      if (!finite_all(y1) || !finite_all(y2) || rel > cfg.tol) {
        dt *= 0.5;
        ++out.rejected;
        since_check = cfg.adapt_interval;  // re-verify the halved step
        if (dt < dt_floor) {
          out.status = finite_all(y1) ? EvolveStatus::stiffness_failure
                                      : EvolveStatus::blowup_detected;
          out.message = "step-size underflow during adaptation";
          out.t_final = t;
          return out;
        }
        continue;
      }
      if (rel < cfg.tol / 64.0) dt = std::min(dt * 1.6, dt_cap);
      y = y2;
      accepted = true;
      since_check = 0;
    } else {
      if (!finite_all(y1)) {
        out.status = EvolveStatus::blowup_detected;
        out.message = "non-finite state; returning last good state";
        out.t_final = t;
        return out;
      }
      y = y1;
      accepted = true;
      ++since_check;
    }
    if (accepted) {
      if (ode.valid && !ode.valid(y)) {
        out.status = EvolveStatus::blowup_detected;
        out.message = "state left the valid region";
        out.t_final = t;
        return out;
      }
      t += step;
      ++out.steps;
      if (on_step) on_step(t, y);
    }
  }
  out.t_final = t;
  if (t < t_end) {
    out.status = EvolveStatus::step_limit;
    out.message = "max_substeps reached";
  }
  out.dt_history.push_back(dt);
  return out;
}

double min_spacing(const std::vector<double>& x) {
  double h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < x.size(); ++i) h = std::min(h, x[i] - x[i - 1]);
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// evolve_sideways
// ---------------------------------------------------------------------------

SidewaysTrajectory evolve_sideways(SidewaysProfile s, const StepperConfig& cfg, double t_end,
                                   const EdgeFn& bc, bool pole_at_zero, const MonitorFn& monitor) {
  cfg.validate();
  const std::size_t n = s.psi.size();
  GridDerivative d(s.psi);

  Ode ode;
  const ConeParams cone = s.cone;
  const std::vector<double> psi = s.psi;
  ode.rhs = [&, cone, psi](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy.resize(2 * n);
    sideways_rates_impl(cone, d, psi, std::span(y.data(), n), std::span(y.data() + n, n),
                        pole_at_zero, false, dy.data(), dy.data() + n);
    if (bc) {
      // edge rates owned by the boundary condition
      dy[0] = dy[n - 1] = dy[n] = dy[2 * n - 1] = 0.0;
    }
  };
  ode.bc = bc;
  ode.valid = [n](const std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] <= 0.0) return false;  // z must stay positive on the chart
    return true;
  };

  const double h = min_spacing(s.psi);
  double zmax = 0.0;
  for (double z : s.z) zmax = std::max(zmax, z);
  const double dt_cap = cfg.cfl_safety * 0.5 * h * h / std::max(zmax, 0.1);

  std::vector<double> y(2 * n);
  std::copy(s.z.begin(), s.z.end(), y.begin());
  std::copy(s.u.begin(), s.u.end(), y.begin() + n);

  SidewaysTrajectory traj;
  traj.checkpoints.push_back(s);
  double next_cp = (cfg.checkpoint_every > 0) ? s.t + cfg.checkpoint_every : t_end;
  auto on_step = [&](double t, const std::vector<double>& yy) {
    s.t = t;
    std::copy(yy.begin(), yy.begin() + n, s.z.begin());
    std::copy(yy.begin() + n, yy.end(), s.u.begin());
    if (monitor) monitor(t, yy);
    if (t >= next_cp && t < t_end) {
      traj.checkpoints.push_back(s);
      next_cp += cfg.checkpoint_every;
    }
  };
  traj.outcome = integrate_rk4(ode, y, s.t, t_end, cfg, dt_cap, on_step);
  s.t = traj.outcome.t_final;
  std::copy(y.begin(), y.begin() + n, s.z.begin());
  std::copy(y.begin() + n, y.end(), s.u.begin());
  traj.checkpoints.push_back(s);
  return traj;
}

// ---------------------------------------------------------------------------
// evolve_rescaled
// ---------------------------------------------------------------------------

RescaledTrajectory evolve_rescaled(RescaledProfile r, const StepperConfig& cfg, double tau_end,
                                   const EdgeFn& bc, const MonitorFn& monitor) {
  cfg.validate();
  const std::size_t n = r.gamma.size();
  GridDerivative d(r.gamma);
  const ConeParams cone = r.cone;
  const std::vector<double> gamma = r.gamma;

  Ode ode;
  ode.rhs = [&, cone, gamma](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy.resize(2 * n);
    sideways_rates_impl(cone, d, gamma, std::span(y.data(), n), std::span(y.data() + n, n), false,
                        true, dy.data(), dy.data() + n);
    if (bc) dy[0] = dy[n - 1] = dy[n] = dy[2 * n - 1] = 0.0;
  };
  ode.bc = bc;
  ode.valid = [n](const std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] <= 0.0) return false;
    return true;
  };

  const double h = min_spacing(r.gamma);
  const double dt_diff = 0.5 * h * h;  // Z <= 1 diffusion scale
  const double dt_adv = h / (0.5 * r.gamma.back() + 1.0);
  const double dt_cap = cfg.cfl_safety * std::min(dt_diff, dt_adv);

  std::vector<double> y(2 * n);
  std::copy(r.Z.begin(), r.Z.end(), y.begin());
  std::copy(r.U.begin(), r.U.end(), y.begin() + n);

  RescaledTrajectory traj;
  traj.checkpoints.push_back(r);
  double next_cp = (cfg.checkpoint_every > 0) ? r.tau + cfg.checkpoint_every : tau_end;
  auto on_step = [&](double t, const std::vector<double>& yy) {
    r.tau = t;
    std::copy(yy.begin(), yy.begin() + n, r.Z.begin());
    std::copy(yy.begin() + n, yy.end(), r.U.begin());
    if (monitor) monitor(t, yy);
    if (t >= next_cp && t < tau_end) {
      traj.checkpoints.push_back(r);
      next_cp += cfg.checkpoint_every;
    }
  };
  traj.outcome = integrate_rk4(ode, y, r.tau, tau_end, cfg, dt_cap, on_step);
  r.tau = traj.outcome.t_final;
  std::copy(y.begin(), y.begin() + n, r.Z.begin());
  std::copy(y.begin() + n, y.end(), r.U.begin());
  traj.checkpoints.push_back(r);
  return traj;
}

// ---------------------------------------------------------------------------
// evolve_perturbation (explicit RK4 or IMEX-CN)
// ---------------------------------------------------------------------------

namespace {

// Crank-Nicolson on B^2 D_{Z,U} with 3-point stencils; Err and the N coupling
// handled explicitly at the midpoint (predictor).
PerturbationTrajectory evolve_perturbation_imex(PerturbationFields f, const StepperConfig& cfg,
                                                double tau_end, bool include_err, const EdgeFn& bc,
                                                const MonitorFn& monitor) {
  const std::size_t n = f.gamma.size();
  const ConeParams c = f.cone;
  const double B2 = c.B2();
  const double nn = c.n, p = c.p;
  GridDerivative d5(f.gamma);  // for explicit pieces

  // 3-point derivative weights per interior node
  std::vector<std::array<double, 3>> w1(n), w2(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    auto w = fd_weights(f.gamma[i], std::span<const double>(f.gamma.data() + i - 1, 3), 2);
    for (int a = 0; a < 3; ++a) {
      w1[i][a] = w[1][a];
      w2[i][a] = w[2][a];
    }
  }
  auto build_matrix = [&](bool isU, double coef, std::vector<double>& sub, std::vector<double>& dia,
                          std::vector<double>& sup) {
    sub.assign(n - 1, 0.0);
    dia.assign(n, 1.0);
    sup.assign(n - 1, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double g = f.gamma[i];
      const double c1 = (isU ? nn / g : (nn - 2.0) / g) - g / (2.0 * B2);
      const double c0 = (isU ? 2.0 : -2.0) * (nn - 1.0) / (g * g);
      // row: (1 - coef*B2*D) with D = w2 + c1*w1 + c0*I
      sub[i - 1] = -coef * B2 * (w2[i][0] + c1 * w1[i][0]);
      dia[i] = 1.0 - coef * B2 * (w2[i][1] + c1 * w1[i][1] + c0);
      sup[i] = -coef * B2 * (w2[i][2] + c1 * w1[i][2]);
    }
    return;
  };

  auto explicit_part = [&](const PerturbationFields& ff, std::vector<double>& eZ,
                           std::vector<double>& eU) {
    eZ.assign(n, 0.0);
    eU.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double g = ff.gamma[i];
      const double U1 = d5.deriv(ff.Utilde, i, 1);
      eZ[i] = B2 * (-(4.0 * p * B2 / g) * U1);
      if (include_err) {
        const double Z1 = d5.deriv(ff.Ztilde, i, 1), Z2 = d5.deriv(ff.Ztilde, i, 2);
        const double U2 = d5.deriv(ff.Utilde, i, 2);
        eZ[i] += err_z_pointwise(c, g, ff.Ztilde[i], Z1, Z2, U1);
        eU[i] += err_u_pointwise(c, g, ff.Ztilde[i], ff.Utilde[i], U1, U2);
      }
    }
  };

  auto apply_D_explicit = [&](bool isU, const std::vector<double>& v, std::vector<double>& Dv) {
    Dv.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double g = f.gamma[i];
      const double c1 = (isU ? nn / g : (nn - 2.0) / g) - g / (2.0 * B2);
      const double c0 = (isU ? 2.0 : -2.0) * (nn - 1.0) / (g * g);
      Dv[i] = w2[i][0] * v[i - 1] + w2[i][1] * v[i] + w2[i][2] * v[i + 1] +
              c1 * (w1[i][0] * v[i - 1] + w1[i][1] * v[i] + w1[i][2] * v[i + 1]) + c0 * v[i];
    }
  };

  PerturbationTrajectory traj;
  traj.checkpoints.push_back(f);
  const double dt = cfg.dt_init;
  std::vector<double> subZ, diaZ, supZ, subU, diaU, supU;
  std::vector<double> eZ, eU, DZv, DUv, rhsZ, rhsU;
  std::vector<double> state(2 * n);
  auto pack = [&]() {
    std::copy(f.Ztilde.begin(), f.Ztilde.end(), state.begin());
    std::copy(f.Utilde.begin(), f.Utilde.end(), state.begin() + n);
  };
  auto unpack = [&]() {
    std::copy(state.begin(), state.begin() + n, f.Ztilde.begin());
    std::copy(state.begin() + n, state.end(), f.Utilde.begin());
  };

  int steps = 0;
  while (f.tau < tau_end && steps < cfg.max_substeps) {
    const double step = std::min(dt, tau_end - f.tau);
    build_matrix(false, 0.5 * step, subZ, diaZ, supZ);
    build_matrix(true, 0.5 * step, subU, diaU, supU);

    // midpoint predictor for the explicit pieces
    PerturbationFields half = f;
    explicit_part(f, eZ, eU);
    apply_D_explicit(false, f.Ztilde, DZv);
    apply_D_explicit(true, f.Utilde, DUv);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      half.Ztilde[i] += 0.5 * step * (B2 * DZv[i] + eZ[i]);
      half.Utilde[i] += 0.5 * step * (B2 * DUv[i] + eU[i]);
    }
    half.tau = f.tau + 0.5 * step;
    if (bc) {
      std::vector<double> hs(2 * n);
      std::copy(half.Ztilde.begin(), half.Ztilde.end(), hs.begin());
      std::copy(half.Utilde.begin(), half.Utilde.end(), hs.begin() + n);
      bc(half.tau, hs);
      std::copy(hs.begin(), hs.begin() + n, half.Ztilde.begin());
      std::copy(hs.begin() + n, hs.end(), half.Utilde.begin());
    }
    explicit_part(half, eZ, eU);

    // rhs = y + dt/2 B2 D y + dt * explicit(half)
    rhsZ = f.Ztilde;
    rhsU = f.Utilde;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      rhsZ[i] += 0.5 * step * B2 * DZv[i] + step * eZ[i];
      rhsU[i] += 0.5 * step * B2 * DUv[i] + step * eU[i];
    }
    // Dirichlet rows: boundary values at tau + dt
    PerturbationFields next = f;
    next.tau = f.tau + step;
    if (bc) {
      std::vector<double> ns(2 * n);
      std::copy(rhsZ.begin(), rhsZ.end(), ns.begin());
      std::copy(rhsU.begin(), rhsU.end(), ns.begin() + n);
      bc(next.tau, ns);
      rhsZ.assign(ns.begin(), ns.begin() + n);
      rhsU.assign(ns.begin() + n, ns.end());
    }
    solve_tridiagonal(subZ, diaZ, supZ, rhsZ);
    solve_tridiagonal(subU, diaU, supU, rhsU);
    f.Ztilde = rhsZ;
    f.Utilde = rhsU;
    f.tau = next.tau;
    ++steps;
    if (!finite_all(f.Ztilde) || !finite_all(f.Utilde)) {
      traj.outcome.status = EvolveStatus::blowup_detected;
      traj.outcome.message = "non-finite state in IMEX step";
      break;
    }
    if (monitor) {
      pack();
      monitor(f.tau, state);
    }
  }
  traj.outcome.t_final = f.tau;
  traj.outcome.steps = steps;
  if (f.tau < tau_end && traj.outcome.status == EvolveStatus::ok)
    traj.outcome.status = EvolveStatus::step_limit;
  traj.checkpoints.push_back(f);
  (void)unpack;
  return traj;
}

}  // namespace

PerturbationTrajectory evolve_perturbation(PerturbationFields f, const StepperConfig& cfg,
                                           double tau_end, bool include_err, const EdgeFn& bc,
                                           const MonitorFn& monitor) {
  cfg.validate();
  if (cfg.scheme == Scheme::imex)
    return evolve_perturbation_imex(std::move(f), cfg, tau_end, include_err, bc, monitor);

  const std::size_t n = f.gamma.size();
  GridDerivative d(f.gamma);
  const ConeParams cone = f.cone;
  const std::vector<double> gamma = f.gamma;

  Ode ode;
  ode.rhs = [&, cone, gamma](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy.resize(2 * n);
    perturbation_rates_impl(cone, d, gamma, std::span(y.data(), n), std::span(y.data() + n, n),
                            include_err, dy.data(), dy.data() + n);
    if (bc) dy[0] = dy[n - 1] = dy[n] = dy[2 * n - 1] = 0.0;
  };
  ode.bc = bc;

  const double h = min_spacing(f.gamma);
  const double B2 = cone.B2();
  const double dt_diff = 0.5 * h * h / B2;
  const double dt_adv = h / (0.5 * f.gamma.back() + 1.0);
  const double dt_cap = cfg.cfl_safety * std::min(dt_diff, dt_adv);

  std::vector<double> y(2 * n);
  std::copy(f.Ztilde.begin(), f.Ztilde.end(), y.begin());
  std::copy(f.Utilde.begin(), f.Utilde.end(), y.begin() + n);

  PerturbationTrajectory traj;
  traj.checkpoints.push_back(f);
  auto on_step = [&](double t, const std::vector<double>& yy) {
    f.tau = t;
    std::copy(yy.begin(), yy.begin() + n, f.Ztilde.begin());
    std::copy(yy.begin() + n, yy.end(), f.Utilde.begin());
    if (monitor) monitor(t, yy);
  };
  traj.outcome = integrate_rk4(ode, y, f.tau, tau_end, cfg, dt_cap, on_step);
  f.tau = traj.outcome.t_final;
  std::copy(y.begin(), y.begin() + n, f.Ztilde.begin());
  std::copy(y.begin() + n, y.end(), f.Utilde.begin());
  traj.checkpoints.push_back(f);
  return traj;
}

// ---------------------------------------------------------------------------
// evolve_arclength
// ---------------------------------------------------------------------------

// ---------------------------------------------------------------------------
// evolve_arclength: arclength-fraction gauge.
//
// Evolving chi by its own (RF) equation next to a smooth pole is numerically
// ill-posed at the semi-discrete level: the pole regularity conditions act as
// infinitely stiff constraints and the chi feedback carries an O(1/h^2)
// spurious growth mode. The evolution is therefore carried out in the gauge
// s(x, t) = L(t) (x - x_0)/(x_N - x_0) with the reparametrizing shift
//   W(x) = V(s(x)) - frac(x) V(L),  V(s) = int_0^s (p phi_ss/phi + q psi_ss/psi),
// which is the fixed-s form of the same flow; chi stays spatially uniform and
// only (phi, psi, L) evolve. Pole-adjacent nodes are slaved to their parity
// series each stage (the constraint projection).
// ---------------------------------------------------------------------------

namespace {

struct GaugeGeometry {
  std::size_t n = 0;
  int ng = 4;                   // ghost layers (equator side only)
  std::vector<double> xs;       // extended coordinate (unit span)
  std::size_t off = 0;          // always 0: the pole edge uses one-sided stencils
  bool right_equator = false;
  std::size_t m_collar = 8;
};

// fields packed  [phi | psi | L]
// The pole edge deliberately uses one-sided stencils: odd-parity ghosts feed
// the psi-slope back into itself with a positive O(1/h^2) coefficient through
// the (1 - psi_s^2)/psi reaction, which is exactly the spurious mode the
// constraint projection has to fight. One-sided closures plus the series
// slaving keep the semi-discrete spectrum in the stable half plane.
void project_pole_series(const std::vector<double>& frac, std::vector<double>& y, std::size_t n,
                         int m);

void arclength_gauge_rates(const ConeParams& cone, const GaugeGeometry& geo,
                           const GridDerivative& d, const std::vector<double>& y,
                           std::vector<double>& dy, const std::vector<double>& frac,
                           double relax_rate) {
  const std::size_t n = geo.n;
  const double p = cone.p, q = cone.q;
  const double L = y[2 * n];
  std::vector<double> phi(geo.xs.size()), psi(geo.xs.size());
  for (std::size_t i = 0; i < n; ++i) {
    phi[geo.off + i] = y[i];
    psi[geo.off + i] = y[n + i];
  }
  if (geo.right_equator) {
    for (int k = 1; k <= geo.ng; ++k) {
      phi[geo.off + n - 1 + k] = y[n - 1 - k];
      psi[geo.off + n - 1 + k] = y[2 * n - 1 - k];
    }
  }
  dy.assign(2 * n + 1, 0.0);
  std::vector<double> integ(n);
  std::vector<double> phs(n), phss(n), pss(n), psss2(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = geo.off + j;
    phs[j] = d.deriv(phi, i, 1) / L;
    phss[j] = d.deriv(phi, i, 2) / (L * L);
    pss[j] = d.deriv(psi, i, 1) / L;
    psss2[j] = d.deriv(psi, i, 2) / (L * L);
    if (j == 0) {
      // pole: psi_ss/psi -> psi_sss/psi_s (one-sided third derivative)
      auto wts = fd_weights(geo.xs[i], std::span<const double>(geo.xs.data() + i, 7), 3);
      double f3 = 0.0;
      for (int a = 0; a < 7; ++a) f3 += wts[3][a] * psi[i + a];
      integ[j] = p * phss[j] / y[j] + q * (f3 / (L * L * L)) / pss[j];
    } else {
      if (y[j] <= 0.0 || y[n + j] <= 0.0)
        throw std::domain_error("evolve_arclength: degenerate metric");
      integ[j] = p * phss[j] / y[j] + q * psss2[j] / y[n + j];
    }
  }
  // V(s) along the grid (trapezoid), shift W = V - frac * V(L)
  std::vector<double> V(n, 0.0);
  const double span = geo.xs[geo.off + n - 1] - geo.xs[geo.off];
  for (std::size_t j = 1; j < n; ++j)
    V[j] = V[j - 1] +
           0.5 * (integ[j] + integ[j - 1]) * (geo.xs[geo.off + j] - geo.xs[geo.off + j - 1]) * L / span;
  const double VL = V[n - 1];
  for (std::size_t j = 0; j < n; ++j) {
    const double frac = (geo.xs[geo.off + j] - geo.xs[geo.off]) / span;
    const double W = V[j] - frac * VL;
    if (j == 0) {
      dy[0] = (1.0 + q) * phss[0] - (p - 1.0) / y[0];
      dy[n] = 0.0;
    } else {
      dy[j] = phss[j] - (p - 1.0) * (1.0 - phs[j] * phs[j]) / y[j] +
              q * phs[j] * pss[j] / y[n + j] - W * phs[j];
      dy[n + j] = psss2[j] - (q - 1.0) * (1.0 - pss[j] * pss[j]) / y[n + j] +
                  p * phs[j] * pss[j] / y[j] - W * pss[j];
    }
  }
  dy[2 * n] = VL;
  // Excised pole collar: the (1-psi_s^2)/psi term linearizes to an advection
  // with cell Peclet number (q-1)/j at node j, so centered stencils are
  // unstable for j < q-1. Those nodes are slaved to the parity series by the
  // per-stage projection and carry no dynamics of their own.
  (void)relax_rate;
  (void)frac;
  for (std::size_t j = 0; j <= geo.m_collar && j < n; ++j) dy[j] = dy[n + j] = 0.0;
}

// Slave the pole-adjacent nodes to parity series fitted on the band
// m+1..2m+6. The band width scales with the collar so the normalized basis
// {u, u^3, u^5} stays well conditioned, and the fit variable is normalized to
// the band end.
void project_pole_series(const std::vector<double>& frac, std::vector<double>& y, std::size_t n,
                         int m) {
  const int j_hi = 2 * m + 6;
  const double s_ref = frac[j_hi];
  auto fit = [&](double* f, bool odd) {
    double A[3][3] = {}, b[3] = {};
    for (int j = m + 1; j <= j_hi; ++j) {
      const double u = frac[j] / s_ref, u2 = u * u;
      const double base = odd ? u : 1.0;
      const double basis[3] = {base, base * u2, base * u2 * u2};
      for (int a = 0; a < 3; ++a) {
        b[a] += basis[a] * f[j];
        for (int bb = 0; bb < 3; ++bb) A[a][bb] += basis[a] * basis[bb];
      }
    }
    for (int c = 0; c < 2; ++c)
      for (int r = c + 1; r < 3; ++r) {
        const double fg = A[r][c] / A[c][c];
        for (int cc = c; cc < 3; ++cc) A[r][cc] -= fg * A[c][cc];
        b[r] -= fg * b[c];
      }
    const double c2 = b[2] / A[2][2];
    const double c1 = (b[1] - A[1][2] * c2) / A[1][1];
    const double c0 = (b[0] - A[0][1] * c1 - A[0][2] * c2) / A[0][0];
    for (int j = 0; j <= m; ++j) {
      const double u = frac[j] / s_ref, u2 = u * u;
      const double base = odd ? u : 1.0;
      f[j] = base * (c0 + c1 * u2 + c2 * u2 * u2);
    }
    if (odd) f[0] = 0.0;
  };
  fit(y.data(), false);
  fit(y.data() + n, true);
}

}  // namespace

WarpedTrajectory evolve_arclength(WarpedProfile w, const StepperConfig& cfg, double t_end,
                                  const MonitorFn& monitor) {
  cfg.validate();
  require(w.has_left_pole, "evolve_arclength: expects a profile with the pole at the first node");
  const std::size_t n = w.x.size();

  GaugeGeometry geo;
  geo.n = n;
  geo.right_equator = w.reflection_symmetric;
  geo.off = 0;
  geo.xs.resize(n + (geo.right_equator ? geo.ng : 0));
  for (std::size_t i = 0; i < n; ++i) geo.xs[geo.off + i] = w.x[i];
  if (geo.right_equator)
    for (int k = 1; k <= geo.ng; ++k)
      geo.xs[geo.off + n - 1 + k] = 2.0 * w.x.back() - w.x[n - 1 - k];
  GridDerivative d(geo.xs);
  std::vector<double> frac(n);
  const double span = w.x.back() - w.x.front();
  for (std::size_t i = 0; i < n; ++i) frac[i] = (w.x[i] - w.x.front()) / span;

  // enter the gauge: the profile (possibly with non-uniform chi) is resampled
  // onto the arclength-fraction coordinate
  const auto s0 = w.arc_length();
  double L = s0.back();
  std::vector<double> y(2 * n + 1);
  {
    Pchip phi_of_s(s0, w.phi), psi_of_s(s0, w.psi);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = phi_of_s(L * frac[i]);
      y[n + i] = psi_of_s(L * frac[i]);
    }
    y[n] = 0.0;  // pole
    y[2 * n] = L;
  }

  const ConeParams cone = w.cone;
  const int m_collar = (cfg.pole_collar > 0)
                           ? cfg.pole_collar
                           : std::max(2 * (cone.q - 1), int(n) / 12);
  require(n > 2 * static_cast<std::size_t>(m_collar) + 8,
          "evolve_arclength: grid too coarse for the pole collar");
  geo.m_collar = static_cast<std::size_t>(m_collar);
  Ode ode;
  ode.rhs = [&, cone](double, const std::vector<double>& yy, std::vector<double>& dy) {
    arclength_gauge_rates(cone, geo, d, yy, dy, frac, 0.0);
  };
  ode.bc = [&, n, m_collar](double, std::vector<double>& yy) {
    project_pole_series(frac, yy, n, m_collar);
  };
  ode.valid = [n](const std::vector<double>& yy) {
    if (!(yy[2 * n] > 0.0)) return false;
    for (std::size_t i = 0; i < n; ++i) {
      if (yy[i] <= 0.0) return false;
      if (i > 0 && yy[n + i] <= 0.0) return false;
    }
    return true;
  };

  const double hs = L * (frac[1] - frac[0]);
  const double dt_cap = cfg.cfl_safety * 0.4 * hs * hs;

  auto unpack = [&](double t, const std::vector<double>& yy, WarpedProfile& out) {
    out = w;
    out.t = t;
    const double Lc = yy[2 * n];
    out.chi.assign(n, Lc / span);
    out.phi.assign(yy.begin(), yy.begin() + n);
    out.psi.assign(yy.begin() + n, yy.begin() + 2 * n);
  };

  WarpedTrajectory traj;
  traj.checkpoints.push_back(w);
  WarpedProfile snap = w;
  auto on_step = [&](double t, const std::vector<double>& yy) {
    if (monitor) {
      unpack(t, yy, snap);
      std::vector<double> packed(3 * n);
      std::copy(snap.chi.begin(), snap.chi.end(), packed.begin());
      std::copy(snap.phi.begin(), snap.phi.end(), packed.begin() + n);
      std::copy(snap.psi.begin(), snap.psi.end(), packed.begin() + 2 * n);
      monitor(t, packed);
    }
  };
  traj.outcome = integrate_rk4(ode, y, w.t, t_end, cfg, dt_cap, on_step);
  WarpedProfile fin;
  unpack(traj.outcome.t_final, y, fin);
  traj.checkpoints.push_back(fin);
  return traj;
}

}  // namespace warpflow
