#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "warpflow/barriers.hpp"

using namespace warpflow;

namespace {
SampleGrid default_grid(double x_lo, double x_hi, double tau0) {
  SampleGrid g;
  g.x_lo = x_lo;
  g.x_hi = x_hi;
  g.tau_lo = tau0;
  g.tau_hi = tau0 + 5.0;
  g.n_space = 200;
  g.n_tau = 50;
  return g;
}
}  // namespace

TEST_CASE("constants_to_use satisfies every lemma constraint") {
  for (auto [p, q] : {std::pair{5, 10}, {5, 12}, {7, 10}, {2, 10}}) {
    const auto bc = constants_to_use(p, q, 4);
    const Spectrum s(cone_constants(p, q));
    const double ea = s.exp_a();
    CHECK(bc.a * bc.a - (q - 1.0) * bc.a + 2.0 * (q - 1.0) < 0.0);
    CHECK(bc.b < bc.a);
    CHECK(bc.b < 2.0 * std::sqrt(double(q)) + 2.0);
    CHECK(bc.kappa > 0.0);
    CHECK(bc.kappa < 2.0 * s.laguerre_alpha());
    CHECK(bc.c > bc.kappa);
    CHECK(bc.c < bc.kappa + ea);
    CHECK(bc.eps > 0.0);
    CHECK(1.0 + bc.eps / bc.b < ea / bc.a + bc.c / (ea + bc.kappa));
    CHECK(bc.l > 0.0);
    CHECK(bc.l < 0.5 * ea);
  }
  CHECK_THROWS((void)constants_to_use(5, 5, 4));  // q >= 10 only

  // the remark's combination at the base point exceeds 1 (p = 5, q = 10)
  const Spectrum s(cone_constants(5, 10));
  const double a0 = (10.0 - 1.0) / 2.0 - 0.5 * std::sqrt(1.0 * 9.0);
  CHECK(s.exp_a() / a0 + 1.0 / 3.0 > 1.0);
}

TEST_CASE("inner cone barriers") {
  const auto c = cone_constants(5, 10);
  const auto g = default_grid(1e-2, 10.0, 40.0);

  SUBCASE("U lower barrier residual and the proof's display") {
    const auto rep = inner_cone_barrier_u(c, 1.0, g);
    CHECK(rep.pass());
    // spec arithmetic: p=5, q=10, c=1, gamma=1 -> residual 9 - 4 = 5
    Candidate cand;
    cand.val = [](double x, double) { return std::log(x); };
    cand.d1 = [](double x, double) { return 1.0 / x; };
    cand.d2 = [](double x, double) { return -1.0 / (x * x); };
    cand.dtau = [](double, double) { return 0.0; };
    CHECK(op_rescaled_u(c, cand, 0.7, 1.0, 40.0) == doctest::Approx(5.0).epsilon(1e-13));

    // transcription cross-check at random points: generic operator vs the
    // hand-coded display (q-1)/g^2 - (p-1)/(c^2 g^2)
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ug(0.02, 8.0), uz(0.3, 1.0);
    for (int i = 0; i < 100; ++i) {
      const double x = ug(rng), Z = uz(rng), cc = 1.0 + uz(rng);
      Candidate cd;
      cd.val = [cc](double y, double) { return std::log(cc * y); };
      cd.d1 = [](double y, double) { return 1.0 / y; };
      cd.d2 = [](double y, double) { return -1.0 / (y * y); };
      cd.dtau = [](double, double) { return 0.0; };
      const double generic = op_rescaled_u(c, cd, Z, x, 0.0);
      const double display = (c.q - 1.0) / (x * x) - (c.p - 1.0) / (cc * cc * x * x);
      CHECK(std::abs(generic - display) < 1e-10 * (1.0 + std::abs(display)));
    }
  }

  SUBCASE("borderline cone angle gives identically zero residual") {
    const double c2 = double(c.p - 1) / double(c.q - 1);
    const auto rep = inner_cone_barrier_u(c, std::sqrt(c2), g);
    CHECK(rep.pass());
    CHECK(std::abs(rep.min_residual) < 1e-10);
    CHECK(std::abs(rep.max_residual) < 1e-9);
  }

  SUBCASE("Z lower barrier: bracket nonnegative at c = B^2") {
    const auto rep = inner_cone_barrier_z(c, c.B2(), g);
    CHECK(rep.pass());
    // the display bracket 2(q-1)c(1-c) - 2pc^2 at c = B^2 is exactly 0
    const double bracket =
        2.0 * (c.q - 1.0) * c.B2() * (1.0 - c.B2()) - 2.0 * c.p * c.B2() * c.B2();
    CHECK(std::abs(bracket) < 1e-14);
    // and positive for smaller c
    const auto rep2 = inner_cone_barrier_z(c, 0.5 * c.B2(), g);
    CHECK(rep2.pass());
    CHECK(rep2.min_residual * std::pow(g.x_hi, 2) > 0.0);
  }

  SUBCASE("gradient barrier is a supersolution with equality at the cone") {
    const auto rep = inner_grad_barrier_u(c, g);
    CHECK(rep.pass());
    CHECK(std::abs(rep.max_residual) < 1e-8);
  }

  SUBCASE("second-derivative nonlinear sign") {
    const auto rep = inner_second_deriv_sign(c, g);
    CHECK(rep.pass());
  }
}

TEST_CASE("xi-region barriers at the reference configuration") {
  const Spectrum s(cone_constants(5, 10));
  const int k = 4;
  const auto bc = constants_to_use(5, 10, k);
  const double tau0 = 40.0;
  auto g = default_grid(1.0, 1e3, tau0);

  SUBCASE("weak U barrier") {
    const auto rep = xi_far_barrier_u_weak(s, k, bc, 1.0, 1e3, tau0, g);
    CHECK(rep.pass());
    CHECK(rep.coefficient_checks.at("a^2-(q-1)a+2(q-1)") < 0.0);
    // spec arithmetic at q = 10, a = 4.5
    CHECK(4.5 * 4.5 - 9.0 * 4.5 + 18.0 == doctest::Approx(-2.25));
  }

  SUBCASE("Z barrier with both coefficient inequalities negative") {
    const auto rep = xi_far_barrier_z(s, k, bc, 1.0, 1.0, 2.0, 1e3, tau0, g);
    CHECK(rep.pass());
    CHECK(rep.coefficient_checks.at("b^2-(n-3)b-2(n-1)") < 0.0);
    CHECK(rep.coefficient_checks.at("b^2/2+2b-2(q-1)") < 0.0);
    // spec arithmetic at q = 10, b = 3, n = 15
    CHECK(0.5 * 9.0 + 6.0 - 18.0 == doctest::Approx(-7.5));
    CHECK(9.0 - 12.0 * 3.0 - 28.0 < 0.0);
  }

  SUBCASE("full U barrier with the Xi window") {
    const auto rep = xi_far_barrier_u(s, k, bc, 1.0, 1.0, 1.0, 1e4, tau0, g);
    CHECK(rep.pass());
    const double Xi = rep.params.at("Xi");
    CHECK(Xi > 1.0);
    CHECK(Xi < 1e4);
    // window: log Xi / log Upsilon in (0, c/(ea + kappa))
    CHECK(rep.coefficient_checks.at("logXi/logUps") > 0.0);
    CHECK(rep.coefficient_checks.at("logXi/logUps") <=
          rep.coefficient_checks.at("c/(ea+kappa)") + 1e-9);
  }

  SUBCASE("monotone in Upsilon and tau0: violations never increase") {
    double prev = 1.0;
    for (double ups : {1e3, 1e4, 1e5}) {
      const auto rep = xi_far_barrier_z(s, k, bc, 1.0, 1.0, 2.0, ups, tau0, g);
      CHECK(rep.violation_fraction <= prev);
      prev = rep.violation_fraction;
    }
    prev = 1.0;
    for (double t0 : {40.0, 50.0, 60.0}) {
      auto gt = default_grid(1.0, 1e3, t0);
      const auto rep = xi_far_barrier_u_weak(s, k, bc, 1.0, 1e3, t0, gt);
      CHECK(rep.violation_fraction <= prev);
      prev = rep.violation_fraction;
    }
  }

  SUBCASE("extension barrier D-window") {
    // ambient U_xi coefficient C < 0 as for an even mode entering the inner region
    const double C_u = -1.0, eta_u = 0.3;
    const double n = 15.0, ea = s.exp_a();
    const double quad = ea * ea - (n - 3.0) * ea - 2.0 * (n - 1.0);
    const double mid1 = 4.0 * 5.0 * s.cone().B2() * (C_u + eta_u) / quad;
    const double mid2 = 4.0 * 5.0 * s.cone().B2() * (C_u - eta_u) / quad;
    const double Dm = 0.5 * std::min(mid1, mid2), Dp = 2.0 * std::max(mid1, mid2);
    auto gx = default_grid(1e3, 1e5, tau0);
    const auto rep = inner_parab_extend_z(s, k, C_u, eta_u, Dm, Dp, 1e3, 1e5, tau0, gx);
    CHECK(rep.coefficients_ok);
    CHECK(rep.violation_fraction == 0.0);
  }
}

TEST_CASE("parabolic-outer interface barriers") {
  const Spectrum s(cone_constants(5, 10));
  const int k = 4;
  const double tau0 = 40.0;
  auto g = default_grid(50.0, 1e5, tau0);
  g.n_space = 200;

  SUBCASE("U lower/upper") {
    const double C = 1.0;
    const double ke = -2.0 * s.B2_lambda(k);
    const double D = 2.0 * (std::abs(C) * ke * ke + 9.0 * std::abs(C) * ke + 18.0 * std::abs(C));
    const auto lo = parab_outer_barrier(s, k, ParabOuterKind::U_lower, C, D, 0.0, 50.0, 1e-4,
                                        0.05, tau0, g);
    CHECK(lo.pass());
    CHECK(lo.coefficient_checks.begin()->second > 0.0);
    const auto hi = parab_outer_barrier(s, k, ParabOuterKind::U_upper, C, -D, 0.0, 50.0, 1e-4,
                                        0.05, tau0, g);
    CHECK(hi.violation_fraction == 0.0);
  }

  SUBCASE("Z upper/lower D-conditions and signs") {
    const double C_U = 1.0;
    const double B2 = s.cone().B2();
    const double Dhi = -2.0 * 8.0 * 5.0 * B2 * B2 * C_U;  // D/2 < -4 p B^4 C_U
    const auto hi = parab_outer_barrier(s, k, ParabOuterKind::Z_upper, 1.0, Dhi, C_U, 100.0,
                                        1e-4, 0.05, tau0, g);
    CHECK(hi.coefficients_ok);
    CHECK(hi.violation_fraction == 0.0);
    // the flagged condition is D/2 > -4 p B^4 C_U as printed; the displayed
    // gamma^{k-1} coefficient additionally needs D/2 > +4 p B^4 C_U, so pick D
    // satisfying both
    const double Dlo = 16.0 * 5.0 * B2 * B2 * C_U;
    const auto lo = parab_outer_barrier(s, k, ParabOuterKind::Z_lower, 1.0, Dlo, C_U, 100.0,
                                        1e-4, 0.05, tau0, g);
    CHECK(lo.coefficients_ok);
    CHECK(lo.violation_fraction == 0.0);
  }
}

TEST_CASE("outer sine-cone barrier") {
  const auto c = cone_constants(5, 5);
  std::vector<double> grid = {0.0};
  for (double x = 0.01; x < 4.0; x *= 1.15) grid.push_back(x);

  SUBCASE("t = 0 level and the psi_* bound") {
    const auto b = sine_cone_barrier(c, 1.0, 1.0, 0.0, grid);
    CHECK(b.z_minus.front() ==
          doctest::Approx(double(c.q - 1) / double(c.q - 1 + c.p)).epsilon(1e-12).scale(1.0));
    CHECK(b.psi_star == doctest::Approx(std::sqrt(2.0 * 4.0 / 9.0)).epsilon(1e-12));
    // C = 1 reproduces the sine-cone profile family: z0 = B^2 at p = q
    CHECK(double(c.q - 1) / double(c.q - 1 + c.p) == doctest::Approx(c.B2()).epsilon(1e-15));
  }

  SUBCASE("K pole rejected") {
    CHECK_THROWS((void)sine_cone_barrier(c, 1.0, 10.0, 1.0, grid));
  }

  SUBCASE("proof equality holds exactly on the positive branch") {
    for (double t : {0.0, 0.01, 0.03}) {
      CHECK(sine_cone_barrier_equality_defect(c, 1.0, 1.0, t, grid) < 1e-10);
      CHECK(sine_cone_barrier_equality_defect(c, 1.7, 0.6, t, grid) < 1e-10);
    }
  }
}

TEST_CASE("membership checks on constructed states") {
  const auto cone = cone_constants(5, 5);
  const Spectrum s(cone);
  const int k = 3;
  RegionParams region = RegionParams::reference(s, k);
  region.tau0 = 8.0;  // desk-scale tau so mode amplitudes are representable
  region.tau1 = 9.0;

  auto make_state = [&](double tau, double amp) {
    PerturbationFields f;
    f.cone = cone;
    f.tau = tau;
    f.M = region.M;
    f.beta = region.beta;
    const int n = 1200;
    f.gamma.resize(n);
    f.Ztilde.resize(n);
    f.Utilde.resize(n);
    for (int i = 0; i < n; ++i) {
      const double g = 0.05 + (30.0 - 0.05) * double(i) / double(n - 1);
      f.gamma[i] = g;
      f.Ztilde[i] = amp * s.resolvent_mode_exact(k, g);
      f.Utilde[i] = amp * s.eigenfunction_u(k, g);
    }
    return f;
  };

  SUBCASE("the exact separable state passes B trivially") {
    std::vector<PerturbationFields> samples;
    for (double tau : {region.tau0, 0.5 * (region.tau0 + region.tau1), region.tau1})
      samples.push_back(make_state(tau, std::exp(s.B2_lambda(k) * tau)));
    const auto rep = membership_check(samples, s, k, region, RegionSet::B);
    CHECK(rep.all_pass);
  }

  SUBCASE("RFC passes the Barriers-I inequalities with zero or B^2 margins") {
    std::vector<PerturbationFields> samples = {make_state(region.tau0, 0.0)};
    RegionParams r2 = region;
    r2.D_consts["D0U"] = 1.0;
    r2.D_consts["D0Z"] = 1.0;
    const auto rep = membership_check(samples, s, k, r2, RegionSet::I);
    CHECK(rep.all_pass);
  }

  SUBCASE("a constructed violation is reported with location") {
    auto f = make_state(region.tau0, 0.0);
    // push U negative near gamma ~ 0.2 inside the inner window
    for (std::size_t i = 0; i < f.gamma.size(); ++i)
      if (f.gamma[i] < 0.4) f.Utilde[i] = -1e-3;
    const auto rep = membership_check({f}, s, k, region, RegionSet::I);
    CHECK_FALSE(rep.all_pass);
    bool found = false;
    for (const auto& it : rep.items)
      if (it.name == "I: U >= 0" && !it.pass && it.max_violation >= 1e-3 - 1e-12) found = true;
    CHECK(found);
  }
}
