#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "warpflow/diagnostics.hpp"
#include "warpflow/io.hpp"

using namespace warpflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

fs::path out_root() {
  if (const char* env = std::getenv("WARPFLOW_OUT")) return fs::path(env);
  return fs::path(".");
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  return v;
}

struct SpectraOptions {
  int p = 5, q = 5, kmax = 6;
  std::string out = "spectra.json";
  bool samples = false;
};

int run_spectra(const SpectraOptions& o) {
  const Spectrum spec(cone_constants(o.p, o.q));
  json rows = json::array();
  for (int k = 0; k <= o.kmax; ++k) {
    json r;
    r["k"] = k;
    r["B2_lambda_k"] = spec.B2_lambda(k);
    r["alpha_k"] = spec.alpha_k(k);
    r["exp_a"] = spec.exp_a();
    r["c_k"] = spec.c_k(k);
    r["c_k_prime"] = spec.c_k_prime(k);
    const double cpp = spec.c_k_doubleprime_ref(k);
    r["c_k_doubleprime_ref"] = std::isfinite(cpp) ? json(cpp) : json("singular");
    rows.push_back(r);
  }
  json doc;
  doc["p"] = o.p;
  doc["q"] = o.q;
  doc["B2_h_j"] = json::array();
  for (int j = 0; j <= o.kmax; ++j) doc["B2_h_j"].push_back(spec.B2_h(j));
  doc["modes"] = rows;
  const fs::path path = out_root() / o.out;
  std::ofstream(path) << doc.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
  if (o.samples) {
    const auto g = linspace(0.05, 10.0, 400);
    for (int k = 0; k <= o.kmax; ++k) {
      const fs::path csv = out_root() / ("eigenfunction_u_" + std::to_string(k) + ".csv");
      std::ofstream f(csv);
      f << "# gamma, U_mode_" << k << ", Z_mode_" << k << "\n";
      for (double x : g)
        f << x << "," << spec.eigenfunction_u(k, x) << "," << spec.eigenfunction_z(k, x) << "\n";
    }
    std::cout << "wrote eigenfunction samples (k <= " << o.kmax << ")\n";
  }
  return kExitOk;
}

struct SimulateOptions {
  std::string preset = "sine-cone";
  std::string scheme = "explicit_rk4";
  double dt_init = 1e-6;
  double cfl_safety = 0.8;
  double t_end = -1.0;
  double checkpoint_every = 0.0;
  int n = 180;
  int seed = 0;
  std::string out = "run";
};

int run_simulate(const SimulateOptions& o) {
  const auto cone = cone_constants(5, 5);
  StepperConfig cfg;
  cfg.dt_init = o.dt_init;
  cfg.cfl_safety = o.cfl_safety;
  cfg.checkpoint_every = o.checkpoint_every;
  cfg.scheme = (o.scheme == "imex") ? Scheme::imex : Scheme::explicit_rk4;

  const fs::path dir = out_root() / o.out;
  fs::create_directories(dir);

  SidewaysProfile init;
  EdgeFn bc;
  double t_end = o.t_end;
  double T_known = -1.0;
  if (o.preset == "sine-cone") {
    SpecialParams sp;
    sp.lambda0 = 1.0;
    init = special_solution(cone, SpecialKind::sine_cone, sp, 0.0, linspace(0.1, 0.45, o.n));
    if (t_end < 0) t_end = 0.4 / (2.0 * cone.n);
    T_known = 1.0 / (2.0 * cone.n);
    const std::size_t m = init.psi.size();
    const double pa = init.psi.front(), pb = init.psi.back();
    bc = [=](double t, std::vector<double>& y) {
      const double l2 = sine_cone_lambda2(cone, 1.0, t);
      y[0] = cone.B2() - pa * pa / l2;
      y[m - 1] = cone.B2() - pb * pb / l2;
      y[m] = std::log(cone.A / cone.B * pa);
      y[2 * m - 1] = std::log(cone.A / cone.B * pb);
    };
  } else if (o.preset == "rfc-window") {
    init = special_solution(cone, SpecialKind::rfc, {}, 0.0, linspace(0.5, 1.5, o.n));
    if (t_end < 0) t_end = 0.02;
    bc = [](double, std::vector<double>&) {};
  } else if (o.preset == "cylinder") {
    init.cone = cone;
    init.psi = linspace(0.5, 1.5, o.n);
    init.z.assign(o.n, 1.0);
    init.u.assign(o.n, 0.25);
    if (t_end < 0) t_end = 0.05;
    const std::size_t m = init.psi.size();
    bc = [=](double t, std::vector<double>& y) {
      const double uex = 0.5 * std::log(std::exp(0.5) - 2.0 * (cone.p - 1.0) * t);
      y[0] = y[m - 1] = 1.0;
      y[m] = y[2 * m - 1] = uex;
    };
  } else {
    std::cerr << "unknown preset " << o.preset << "\n";
    return kExitValidation;
  }

  if (cfg.checkpoint_every <= 0.0) cfg.checkpoint_every = t_end / 10.0;
  const auto traj = evolve_sideways(init, cfg, t_end, bc);

  json manifest;
  manifest["preset"] = o.preset;
  manifest["scheme"] = o.scheme;
  manifest["dt_init"] = cfg.dt_init;
  manifest["cfl_safety"] = cfg.cfl_safety;
  manifest["t_end"] = t_end;
  manifest["checkpoint_every"] = cfg.checkpoint_every;
  manifest["seed"] = o.seed;
  manifest["status"] = to_string(traj.outcome.status);
  manifest["steps"] = traj.outcome.steps;
  manifest["rejected"] = traj.outcome.rejected;
  manifest["dt_history"] = traj.outcome.dt_history;
  if (T_known > 0) manifest["T"] = T_known;
  json files = json::array();
  int violations = 0;
  double grad_bound0 = 0.0;
  for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
    const auto& s = traj.checkpoints[i];
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%03zu.csv", i);
    write_csv(dir / name, s);
    files.push_back({{"file", name}, {"t", s.t}});
    // maximum-principle monitor: |grad psi| = sqrt(z) within max(1, initial)
    double g = 0.0;
    for (double z : s.z) g = std::max(g, std::sqrt(std::max(z, 0.0)));
    if (i == 0) grad_bound0 = std::max(1.0, g);
    if (g > grad_bound0 + 1e-8) ++violations;
  }
  manifest["checkpoints"] = files;
  manifest["monitor_violations"] = violations;
  const fs::path man = dir / "run.json";
  std::ofstream(man) << manifest.dump(2) << "\n";
  std::cout << "wrote " << man << " (" << to_string(traj.outcome.status) << ")\n";
  return traj.outcome.status == EvolveStatus::ok ? kExitOk : kExitNumerical;
}

struct BarrierOptions {
  std::string lemma = "all";
  std::string preset = "reference";
  int p = 5, q = 10, k = 4;
  double Upsilon_U = 1e3, Upsilon_Z = 1e5, tau0 = 40.0;
  std::string out = "barrier_report.json";
};

int run_barriers(const BarrierOptions& o) {
  const auto cone = cone_constants(o.p, o.q);
  const Spectrum spec(cone);
  const auto bc = constants_to_use(o.p, o.q, o.k);
  SampleGrid inner{1e-2, 10.0, o.tau0, o.tau0 + 5.0, 200, 50};
  SampleGrid xi{1.0, o.Upsilon_U, o.tau0, o.tau0 + 5.0, 200, 50};
  SampleGrid xiZ{o.Upsilon_U, o.Upsilon_Z, o.tau0, o.tau0 + 5.0, 200, 50};
  SampleGrid po{50.0, 1e5, o.tau0, o.tau0 + 5.0, 200, 50};

  const double B2 = cone.B2();
  const double ea = spec.exp_a();
  const double ke = -2.0 * spec.B2_lambda(o.k);
  const double quad = ea * ea - (cone.n - 3.0) * ea - 2.0 * (cone.n - 1.0);
  const double mid1 = 4.0 * cone.p * B2 * (-0.7) / quad;
  const double mid2 = 4.0 * cone.p * B2 * (-1.3) / quad;
  const double DU = 2.0 * (ke * ke + (o.q - 1.0) * ke + 2.0 * (o.q - 1.0));

  std::vector<std::pair<std::string, std::function<BarrierReport()>>> lemmas = {
      {"inner-cone-u", [&] { return inner_cone_barrier_u(cone, cone.A / cone.B, inner); }},
      {"inner-cone-z", [&] { return inner_cone_barrier_z(cone, B2, inner); }},
      {"inner-grad-u", [&] { return inner_grad_barrier_u(cone, inner); }},
      {"inner-second-deriv", [&] { return inner_second_deriv_sign(cone, inner); }},
      {"inner-far-u-weak",
       [&] { return xi_far_barrier_u_weak(spec, o.k, bc, 1.0, o.Upsilon_U, o.tau0, xi); }},
      {"inner-far-z",
       [&] { return xi_far_barrier_z(spec, o.k, bc, 1.0, 1.0, 2.0, o.Upsilon_U, o.tau0, xi); }},
      {"inner-far-u",
       [&] { return xi_far_barrier_u(spec, o.k, bc, 1.0, 1.0, 1.0, o.Upsilon_U, o.tau0, xi); }},
      {"inner-parab-extend-z",
       [&] {
         return inner_parab_extend_z(spec, o.k, -1.0, 0.3, 0.5 * std::min(mid1, mid2),
                                     2.0 * std::max(mid1, mid2), o.Upsilon_U, o.Upsilon_Z,
                                     o.tau0, xiZ);
       }},
      {"parab-outer-u-lower",
       [&] {
         return parab_outer_barrier(spec, o.k, ParabOuterKind::U_lower, 1.0, DU, 0.0, 50.0,
                                    1e-4, 0.05, o.tau0, po);
       }},
      {"parab-outer-u-upper",
       [&] {
         return parab_outer_barrier(spec, o.k, ParabOuterKind::U_upper, 1.0, -DU, 0.0, 50.0,
                                    1e-4, 0.05, o.tau0, po);
       }},
      {"parab-outer-z-upper",
       [&] {
         return parab_outer_barrier(spec, o.k, ParabOuterKind::Z_upper, 1.0,
                                    -16.0 * cone.p * B2 * B2, 1.0, 100.0, 1e-4, 0.05, o.tau0,
                                    po);
       }},
      {"parab-outer-z-lower",
       [&] {
         return parab_outer_barrier(spec, o.k, ParabOuterKind::Z_lower, 1.0,
                                    16.0 * cone.p * B2 * B2, 1.0, 100.0, 1e-4, 0.05, o.tau0,
                                    po);
       }},
  };

  json arr = json::array();
  bool all_ok = true;
  for (const auto& [name, fn] : lemmas) {
    if (o.lemma != "all" && o.lemma != name) continue;
    const auto rep = fn();
    arr.push_back(json::parse(to_json(rep)));
    all_ok = all_ok && rep.pass();
    std::cout << (rep.pass() ? "[pass] " : "[FAIL] ") << name
              << "  violations: " << rep.violation_fraction << "\n";
  }
  if (arr.empty()) {
    std::cerr << "unknown lemma " << o.lemma << "\n";
    return kExitValidation;
  }
  // the sine-cone outer barrier has no tau sampling; record its exactness
  {
    const auto grid = linspace(0.01, 3.0, 200);
    const double defect = sine_cone_barrier_equality_defect(cone, 1.0 + 1.0, 0.01, 0.0, grid);
    json j;
    j["lemma"] = "outer-sine-cone-z";
    j["equality_defect"] = defect;
    j["pass"] = defect < 1e-9;
    arr.push_back(j);
    all_ok = all_ok && defect < 1e-9;
  }
  const fs::path path = out_root() / o.out;
  std::ofstream(path) << arr.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
  return all_ok ? kExitOk : kExitNumerical;
}

struct InitdataOptions {
  int p = 5, q = 5, k = 4;
  double tau0 = 40.0, eps0 = 0.1;
  std::string out = "initdata";
};

int run_initdata(const InitdataOptions& o) {
  const Spectrum spec(cone_constants(o.p, o.q));
  ModeCoefficients mc;
  mc.k = o.k;
  mc.K = interlacing_K(spec, o.k);
  mc.p_vec.assign(o.k, 0.0);
  mc.q_vec.assign(mc.K + 1, 0.0);
  mc.eps0 = o.eps0;
  RegionParams region = RegionParams::reference(spec, o.k);
  region.tau0 = o.tau0;
  region.tau1 = o.tau0 + 5.0;
  const auto res = assemble(spec, mc, region);
  const fs::path dir = out_root() / o.out;
  fs::create_directories(dir);
  write_csv(dir / "profile.csv", res.profile);
  json j;
  j["p"] = o.p;
  j["q"] = o.q;
  j["k"] = o.k;
  j["K"] = mc.K;
  j["tau0"] = o.tau0;
  j["eps0"] = o.eps0;
  j["D2_measured"] = res.outer.D2_measured;
  j["sup_g2f"] = res.inner.sup_g2f;
  j["membership_I"] = json::parse(to_json(res.memb_I));
  j["membership_B"] = json::parse(to_json(res.memb_B));
  j["membership_O"] = json::parse(to_json(res.memb_O));
  j["all_pass"] = res.all_pass();
  std::ofstream(dir / "membership.json") << j.dump(2) << "\n";
  std::cout << "wrote " << (dir / "membership.json") << " all_pass=" << res.all_pass() << "\n";
  return res.all_pass() ? kExitOk : kExitNumerical;
}

struct DiagnoseOptions {
  std::string manifest = "run/run.json";
  std::string out = "diagnosis.json";
};

int run_diagnose(const DiagnoseOptions& o) {
  const fs::path man_path = out_root() / o.manifest;
  std::ifstream in(man_path);
  if (!in.good()) {
    std::cerr << "cannot open manifest " << man_path << "\n";
    return kExitValidation;
  }
  json manifest;
  in >> manifest;
  const fs::path dir = man_path.parent_path();
  DiagnosticsRecord rec;
  for (const auto& entry : manifest["checkpoints"]) {
    const auto s = read_sideways_csv(dir / entry["file"].get<std::string>());
    rec.append_time(s.t);
    SidewaysGeometry geo(s);
    rec.max_abs_rm.push_back(geo.max_abs_rm());
    rec.max_abs_r.push_back(geo.max_abs_r());
  }
  json out;
  const auto fit = fit_blowup(rec.times, rec.max_abs_rm);
  out["fit_ok"] = fit.ok;
  out["message"] = fit.message;
  if (fit.ok) {
    out["T_est"] = fit.T;
    out["exponent"] = fit.exponent;
    out["stderr"] = fit.stderr_exponent;
    out["type"] = fit.type_I ? "I" : "II";
  }
  if (manifest.contains("T"))
    out["scalar_sup"] = typeI_scalar_monitor(rec, manifest["T"].get<double>());
  // plot-ready series
  {
    std::ofstream csv(out_root() / "diagnosis_series.csv");
    csv << "# t, max_abs_rm, max_abs_r\n";
    for (std::size_t i = 0; i < rec.times.size(); ++i)
      csv << rec.times[i] << "," << rec.max_abs_rm[i] << "," << rec.max_abs_r[i] << "\n";
  }
  std::ofstream(out_root() / o.out) << out.dump(2) << "\n";
  std::cout << "wrote " << (out_root() / o.out) << "\n";
  return kExitOk;
}

int run_oracle() {
  const auto cone = cone_constants(5, 5);
  const Spectrum spec(cone);
  int failures = 0;
  auto report = [&](const char* name, bool ok, double value) {
    std::cout << (ok ? "[pass] " : "[FAIL] ") << name << "  (" << value << ")\n";
    if (!ok) ++failures;
  };

  {  // RFC stationarity
    const auto rfc = special_solution(cone, SpecialKind::rfc, {}, 0.0, linspace(0.5, 1.5, 512));
    const auto r = rhs_sideways(rfc);
    double worst = 0.0;
    for (std::size_t i = 3; i + 3 < rfc.psi.size(); ++i)
      worst = std::max({worst, std::abs(r.z_t[i]), std::abs(r.u_t[i])});
    report("RFC stationarity (sideways rhs)", worst < 1e-8, worst);
  }
  {  // sine-cone short tracking
    SpecialParams sp;
    sp.lambda0 = 1.0;
    auto init = special_solution(cone, SpecialKind::sine_cone, sp, 0.0, linspace(0.1, 0.45, 180));
    StepperConfig cfg;
    cfg.dt_init = 1e-6;
    const double t_end = 0.1 / (2.0 * cone.n);
    const std::size_t m = init.psi.size();
    const double pa = init.psi.front(), pb = init.psi.back();
    auto bcf = [&](double t, std::vector<double>& y) {
      const double l2 = sine_cone_lambda2(cone, 1.0, t);
      y[0] = cone.B2() - pa * pa / l2;
      y[m - 1] = cone.B2() - pb * pb / l2;
      y[m] = std::log(cone.A / cone.B * pa);
      y[2 * m - 1] = std::log(cone.A / cone.B * pb);
    };
    const auto traj = evolve_sideways(init, cfg, t_end, bcf);
    double err = 0.0;
    const double l2 = sine_cone_lambda2(cone, 1.0, traj.outcome.t_final);
    const auto& fin = traj.checkpoints.back();
    for (std::size_t i = 0; i < fin.psi.size(); ++i) {
      const double expect = cone.B2() - fin.psi[i] * fin.psi[i] / l2;
      err = std::max(err, std::abs(fin.z[i] - expect) / std::abs(expect));
    }
    report("sine-cone tracking (short window)",
           traj.outcome.status == EvolveStatus::ok && err < 1e-4, err);
  }
  {  // eigen residuals under the module stencils
    const std::size_t N = 19901;
    std::vector<double> g(N), e(N);
    for (std::size_t i = 0; i < N; ++i) g[i] = 0.05 + (10.0 - 0.05) * double(i) / double(N - 1);
    GridDerivative d(g);
    double worst = 0.0;
    for (int k = 0; k <= 4; ++k) {
      for (std::size_t i = 0; i < N; ++i) e[i] = spec.eigenfunction_u(k, g[i]);
      for (std::size_t i = 0; i < N; ++i) {
        if (g[i] < 0.2 || g[i] > 8.0) continue;
        const double Du = d.deriv(e, i, 2) +
                          (cone.n / g[i] - g[i] / (2.0 * cone.B2())) * d.deriv(e, i, 1) +
                          2.0 * (cone.n - 1.0) / (g[i] * g[i]) * e[i];
        worst = std::max(worst, std::abs(Du - spec.lambda_u(k) * e[i]) /
                                    (1.0 + std::abs(spec.lambda_u(k) * e[i])));
      }
    }
    report("eigenfunction residuals (k <= 4)", worst < 1e-6, worst);
  }
  {  // orthonormality
    WeightedIP ip(cone.n, 1.0 / (2.0 * cone.B2()), 128, -2.0 * spec.exp_a());
    double worst = 0.0;
    for (int j = 0; j <= 4; ++j)
      for (int l = 0; l <= 4; ++l) {
        const double v = ip.ip([&](double r) { return spec.eigenfunction_u(j, r); },
                               [&](double r) { return spec.eigenfunction_u(l, r); });
        worst = std::max(worst, std::abs(v - (j == l ? 1.0 : 0.0)));
      }
    report("mode orthonormality", worst < 1e-8, worst);
  }
  std::cout << (failures == 0 ? "oracle: all pass\n" : "oracle: FAILURES\n");
  return failures == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly-warped product Ricci flow toolkit"};
  app.set_config("--config");

  SpectraOptions so;
  auto* spectra = app.add_subcommand("spectra", "mode tables and eigenfunction samples");
  spectra->add_option("--p", so.p);
  spectra->add_option("--q", so.q);
  spectra->add_option("--kmax", so.kmax);
  spectra->add_option("--out", so.out);
  spectra->add_flag("--samples", so.samples);

  SimulateOptions mo;
  auto* simulate = app.add_subcommand("simulate", "evolve a preset and write checkpoints");
  simulate->add_option("--preset", mo.preset, "sine-cone | rfc-window | cylinder");
  simulate->add_option("--scheme", mo.scheme, "explicit_rk4 | imex");
  simulate->add_option("--dt-init", mo.dt_init);
  simulate->add_option("--cfl-safety", mo.cfl_safety);
  simulate->add_option("--t-end", mo.t_end);
  simulate->add_option("--checkpoint-every", mo.checkpoint_every);
  simulate->add_option("--n", mo.n);
  simulate->add_option("--seed", mo.seed);
  simulate->add_option("--out", mo.out);

  BarrierOptions bo;
  auto* barriers = app.add_subcommand("barriers", "residual sign reports per lemma");
  barriers->add_option("--lemma", bo.lemma);
  barriers->add_option("--preset", bo.preset, "reference | custom");
  barriers->add_option("--p", bo.p);
  barriers->add_option("--q", bo.q);
  barriers->add_option("--k", bo.k);
  barriers->add_option("--upsilon-u", bo.Upsilon_U);
  barriers->add_option("--upsilon-z", bo.Upsilon_Z);
  barriers->add_option("--tau0", bo.tau0);
  barriers->add_option("--out", bo.out);

  InitdataOptions io_;
  auto* initdata = app.add_subcommand("initdata", "assemble initial data and check membership");
  initdata->add_option("--p", io_.p);
  initdata->add_option("--q", io_.q);
  initdata->add_option("--k", io_.k);
  initdata->add_option("--tau0", io_.tau0);
  initdata->add_option("--eps0", io_.eps0);
  initdata->add_option("--out", io_.out);

  DiagnoseOptions dopt;
  auto* diagnose = app.add_subcommand("diagnose", "analyze a trajectory manifest");
  diagnose->add_option("--manifest", dopt.manifest);
  diagnose->add_option("--out", dopt.out);

  app.add_subcommand("oracle", "exact-solution regression suite");

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (spectra->parsed()) return run_spectra(so);
    if (simulate->parsed()) return run_simulate(mo);
    if (barriers->parsed()) return run_barriers(bo);
    if (initdata->parsed()) return run_initdata(io_);
    if (diagnose->parsed()) return run_diagnose(dopt);
    return run_oracle();
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
