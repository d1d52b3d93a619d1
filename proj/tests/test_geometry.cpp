#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "warpflow/geometry.hpp"
#include "warpflow/profiles.hpp"

using namespace warpflow;

namespace {
std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  return v;
}
}  // namespace

TEST_CASE("cone constants closed forms") {
  const auto c55 = cone_constants(5, 5);
  CHECK(c55.A == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c55.B == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c55.n == 10);
  CHECK(c55.spectral_available);

  const auto c22 = cone_constants(2, 2);
  CHECK(c22.A == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-15));
  CHECK(c22.B == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-15));
  CHECK_FALSE(c22.spectral_available);

  const auto c510 = cone_constants(5, 10);
  CHECK(c510.A2() == doctest::Approx(4.0 / 14.0).epsilon(1e-15));
  CHECK(c510.B2() == doctest::Approx(9.0 / 14.0).epsilon(1e-15));
  CHECK(c510.A2() + c510.B2() < 1.0);
  // A^2 + B^2 = (p+q-2)/(p+q-1)
  CHECK(c510.A2() + c510.B2() == doctest::Approx(13.0 / 14.0).epsilon(1e-15));

  CHECK_THROWS(cone_constants(1, 5));
}

TEST_CASE("sectional generators on special solutions") {
  const auto c = cone_constants(5, 5);
  const auto grid = linspace(0.5, 1.6, 512);

  SUBCASE("Ricci-flat cone: all Ricci components vanish") {
    const auto rfc = special_solution(c, SpecialKind::rfc, {}, 0.0, grid);
    SidewaysGeometry geo(rfc);
    const double p = c.p, q = c.q;
    for (std::size_t i = 4; i + 4 < grid.size(); ++i) {
      const auto g = geo.generators(i);
      // Ricci components in sideways variables
      const double ric_s = p * g.h + q * g.k;
      const double ric_phi = g.h + (p - 1) * g.j + q * g.m;
      const double ric_psi = g.k + (q - 1) * g.l + p * g.m;
      CHECK(std::abs(ric_s) < 1e-8);
      CHECK(std::abs(ric_phi) < 1e-8);
      CHECK(std::abs(ric_psi) < 1e-8);
      CHECK(std::abs(geo.scalar_curvature(i)) < 1e-7);
    }
  }

  SUBCASE("sine cone: k = 1/lambda^2, Einstein with R = 11(p+q)/lambda^2") {
    SpecialParams sp;
    sp.lambda0 = 1.0;
    const auto sc = special_solution(c, SpecialKind::sine_cone, sp, 0.0, linspace(0.1, 0.6, 500));
    SidewaysGeometry geo(sc);
    for (std::size_t i = 4; i + 4 < sc.psi.size(); ++i) {
      const auto g = geo.generators(i);
      CHECK(g.k == doctest::Approx(1.0).epsilon(1e-9));  // 1/lambda^2 at lambda = 1
      CHECK(geo.scalar_curvature(i) == doctest::Approx(110.0).epsilon(1e-6));
    }
  }

  SUBCASE("flat product cylinder: l = k = m = 0") {
    SpecialParams sp;
    sp.u0 = 0.3;
    const auto cyl = special_solution(c, SpecialKind::cylinder, sp, 0.0, grid);
    SidewaysGeometry geo(cyl);
    for (std::size_t i = 4; i + 4 < grid.size(); ++i) {
      const auto g = geo.generators(i);
      CHECK(std::abs(g.l) < 1e-12);
      CHECK(std::abs(g.k) < 1e-12);
      CHECK(std::abs(g.m) < 1e-12);
      // j = e^{-2u} for the flat-z factor
      CHECK(g.j == doctest::Approx(std::exp(-2.0 * 0.3)).epsilon(1e-10));
    }
  }
}

TEST_CASE("ricci components of warped profiles") {
  const auto c = cone_constants(5, 5);

  SUBCASE("cone phi = A x, psi = B x is Ricci flat") {
    WarpedProfile w;
    w.cone = c;
    w.x = linspace(0.5, 2.0, 300);
    w.chi.assign(300, 1.0);
    w.phi.resize(300);
    w.psi.resize(300);
    for (std::size_t i = 0; i < 300; ++i) {
      w.phi[i] = c.A * w.x[i];
      w.psi[i] = c.B * w.x[i];
    }
    for (std::size_t i : {5ul, 100ul, 250ul}) {
      const auto r = ricci_components(w, i);
      CHECK(std::abs(r.rr) < 1e-9);
      CHECK(std::abs(r.pphi) < 1e-9);
      CHECK(std::abs(r.ppsi) < 1e-9);
    }
  }

  SUBCASE("sine cone at lambda = 1 is Einstein: Ric = (p+q) g componentwise") {
    // s in (0, pi/2): phi = A sin s, psi = B sin s, chi = 1 (x = s)
    WarpedProfile w;
    w.cone = c;
    w.x = linspace(0.3, 1.2, 400);
    w.chi.assign(400, 1.0);
    w.phi.resize(400);
    w.psi.resize(400);
    for (std::size_t i = 0; i < 400; ++i) {
      w.phi[i] = c.A * std::sin(w.x[i]);
      w.psi[i] = c.B * std::sin(w.x[i]);
    }
    for (std::size_t i : {10ul, 200ul, 380ul}) {
      const auto r = ricci_components(w, i);
      CHECK(r.rr == doctest::Approx(10.0).epsilon(1e-7));
      CHECK(r.pphi == doctest::Approx(10.0).epsilon(1e-7));
      CHECK(r.ppsi == doctest::Approx(10.0).epsilon(1e-7));
    }
  }

  SUBCASE("Einstein product S^{q+1} x S^p: components equal the factor constants") {
    // phi = const phi0, psi = sin(s): Ric = q/1 * g on S^{q+1}, (p-1)/phi0^2 * g on S^p.
    // Einstein product requires q = (p-1)/phi0^2.
    const double phi0 = std::sqrt(double(c.p - 1) / double(c.q));
    WarpedProfile w;
    w.cone = c;
    w.x = linspace(0.3, 1.2, 400);
    w.chi.assign(400, 1.0);
    w.phi.assign(400, phi0);
    w.psi.resize(400);
    for (std::size_t i = 0; i < 400; ++i) w.psi[i] = std::sin(w.x[i]);
    for (std::size_t i : {10ul, 200ul, 380ul}) {
      const auto r = ricci_components(w, i);
      CHECK(r.rr == doctest::Approx(double(c.q)).epsilon(1e-7));
      CHECK(r.pphi == doctest::Approx(double(c.q)).epsilon(1e-7));  // = (p-1)/phi0^2
      CHECK(r.ppsi == doctest::Approx(double(c.q)).epsilon(1e-7));
    }
  }
}

TEST_CASE("coordinate transforms") {
  const auto c = cone_constants(5, 5);

  SUBCASE("round sphere: z = 1 - psi^2, u = const") {
    WarpedProfile w;
    w.cone = c;
    w.reflection_symmetric = false;
    w.x = linspace(0.15, 1.35, 600);  // s below the equator at pi/2
    w.chi.assign(600, 1.0);
    w.phi.assign(600, 2.0);
    w.psi.resize(600);
    for (std::size_t i = 0; i < 600; ++i) w.psi[i] = std::sin(w.x[i]);
    const auto sw = to_sideways(w, Half::left, 200);
    for (std::size_t i = 0; i < sw.psi.size(); ++i) {
      CHECK(sw.z[i] == doctest::Approx(1.0 - sw.psi[i] * sw.psi[i]).epsilon(5e-6));
      CHECK(sw.u[i] == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    }
  }

  SUBCASE("non-monotone psi rejected") {
    WarpedProfile w;
    w.cone = c;
    w.x = linspace(0.3, 2.6, 300);
    w.chi.assign(300, 1.0);
    w.phi.assign(300, 2.0);
    w.psi.resize(300);
    for (std::size_t i = 0; i < 300; ++i) w.psi[i] = std::sin(w.x[i]);  // peak inside
    CHECK_THROWS_AS((void)to_sideways(w, Half::left, 100), std::domain_error);
  }

  SUBCASE("rescaled round trip is bit-stable at 1e-15") {
    SidewaysProfile s;
    s.cone = c;
    s.t = 0.3;
    s.psi = linspace(0.1, 1.0, 101);
    s.z.resize(101);
    s.u.resize(101);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0.2, 0.8);
    for (int i = 0; i < 101; ++i) {
      s.z[i] = dist(rng);
      s.u[i] = dist(rng) - 0.5;
    }
    const auto r = to_rescaled(s, 1.0);
    const auto back = from_rescaled(r);
    CHECK(back.t == doctest::Approx(s.t).epsilon(1e-14));
    for (int i = 0; i < 101; ++i) {
      CHECK(back.psi[i] == doctest::Approx(s.psi[i]).epsilon(1e-13));
      CHECK(back.z[i] == doctest::Approx(s.z[i]).epsilon(1e-13));
      CHECK(back.u[i] == doctest::Approx(s.u[i]).epsilon(1e-13));
    }
    CHECK_THROWS((void)to_rescaled(s, 0.2));  // t >= T rejected

    // perturbation view round-trips
    for (int i : {0, 50, 100}) {
      const double Zt = r.Ztilde(i), Ut = r.Utilde(i);
      CHECK(Zt + c.B2() == doctest::Approx(r.Z[i]).epsilon(1e-15));
      CHECK(Ut + std::log(c.A / c.B * r.gamma[i]) == doctest::Approx(r.U[i]).epsilon(1e-14));
    }
  }

  SUBCASE("cone profiles map to Z = B^2, U = log(A gamma / B)") {
    const auto rfc = special_solution(c, SpecialKind::rfc, {}, 0.7, linspace(0.2, 1.5, 64));
    const auto r = to_rescaled(rfc, 1.0);
    for (std::size_t i = 0; i < r.gamma.size(); ++i) {
      CHECK(r.Z[i] == doctest::Approx(c.B2()).epsilon(1e-15));
      CHECK(r.Ztilde(i) == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(std::abs(r.Utilde(i)) < 1e-13);
    }
  }

  SUBCASE("rescaled sine cone: Z = B^2 - gamma^2/(e^tau lambda^2)") {
    SpecialParams sp;
    sp.lambda0 = 1.0;
    const double t = 0.01, T = 1.0 / 20.0;  // extinction of lambda0 = 1 at p = q = 5
    const auto sc = special_solution(c, SpecialKind::sine_cone, sp, t, linspace(0.05, 0.55, 64));
    const auto r = to_rescaled(sc, T);
    const double l2 = sine_cone_lambda2(c, 1.0, t);
    for (std::size_t i = 0; i < r.gamma.size(); ++i) {
      const double expect = c.B2() - r.gamma[i] * r.gamma[i] / (std::exp(r.tau) * l2);
      CHECK(r.Z[i] == doctest::Approx(expect).epsilon(1e-12));
      // static rescaled form at the matched singular time: Z = B^2 - gamma^2/(2(p+q))
      CHECK(std::exp(r.tau) * l2 == doctest::Approx(2.0 * c.n).epsilon(1e-12));
    }
  }
}

TEST_CASE("special solution time laws") {
  const auto c = cone_constants(5, 5);
  SUBCASE("sine cone lambda(t)^2 and extinction") {
    const double t = 1.0 / (4.0 * c.n);
    CHECK(sine_cone_lambda2(c, 1.0, t) == doctest::Approx(0.5).epsilon(1e-15));
    SpecialParams sp;
    sp.lambda0 = 1.0;
    CHECK_THROWS((void)special_solution(c, SpecialKind::sine_cone, sp, 0.06, {0.1}));
    // domain endpoint: z(psi_max) = 0
    const double l2 = sine_cone_lambda2(c, 1.0, t);
    const double psi_max = c.B * std::sqrt(l2);
    const auto sc = special_solution(c, SpecialKind::sine_cone, sp, t, {psi_max});
    CHECK(sc.z[0] == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("rfc is stationary") {
    const auto grid = linspace(0.2, 1.0, 16);
    const auto a = special_solution(c, SpecialKind::rfc, {}, 0.0, grid);
    const auto b = special_solution(c, SpecialKind::rfc, {}, 0.37, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(a.z[i] == b.z[i]);
      CHECK(a.u[i] == b.u[i]);
    }
  }
}

TEST_CASE("sign change counting with noise floor") {
  std::vector<double> f = {1.0, 0.5, 1e-14, -0.5, -1.0, 1e-13, -0.7};
  CHECK(sign_change_count(f) == 1);
  std::vector<double> g = {1.0, -1.0, 1.0, -1.0};
  CHECK(sign_change_count(g) == 3);
}

TEST_CASE("three views agree after transforms at O(h^2)") {
  const auto c = cone_constants(5, 5);
  auto run = [&](std::size_t n) {
    WarpedProfile w;
    w.cone = c;
    w.x = linspace(0.2, 1.2, n);
    w.chi.assign(n, 1.0);
    w.phi.resize(n);
    w.psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      w.phi[i] = 1.5 + 0.1 * std::cos(w.x[i]);
      w.psi[i] = std::sin(w.x[i]);
    }
    const auto sw = to_sideways(w, Half::left, n);
    const auto back = from_sideways(sw);
    // compare phi(psi) between original and round-trip via interpolation
    double err = 0.0;
    for (std::size_t i = 5; i + 5 < n; ++i) {
      const double phi_rt = interp_cubic(back.psi, back.phi, w.psi[i]);
      err = std::max(err, std::abs(phi_rt - w.phi[i]));
    }
    return err;
  };
  const double e1 = run(200), e2 = run(400);
  CHECK(e1 / e2 >= 3.0);  // at least ~2nd order under refinement
  CHECK(e2 < 1e-6);
}
