#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liouville/quadrature.hpp"
#include "liouville/rng.hpp"
#include "liouville/solver.hpp"

using namespace liouville;

namespace {
Divisor reference_divisor() {
  return Divisor{{{PunctureKind::Bulk, {0, 1}, -0.75},
                  {PunctureKind::Boundary, {0, 0}, -0.75},
                  {PunctureKind::Boundary, {1, 0}, -0.75}}};
}

struct Setup {
  Mesh mesh;
  FeSpace space;
  Locator loc;
  SingularQuadrature quad;
  Setup(const Divisor& d, double h, int depth, QuadParams qp = {})
      : mesh(build_mesh(d, h, depth)),
        space(FeSpace::build(mesh, 2)),
        loc(mesh),
        quad(space, loc, d, qp) {}
};
}  // namespace

TEST_CASE("gauss legendre exactness") {
  GaussRule g = gauss_legendre(8);
  for (int k = 0; k <= 15; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], k);
    CHECK(s == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
  }
}

TEST_CASE("gauss jacobi exactness for singular weights") {
  for (double beta : {-0.9, -0.5, -0.25, 0.7, 1.0}) {
    GaussRule g = gauss_jacobi01(10, beta);
    for (int j = 0; j <= 19; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], j);
      CHECK(s == doctest::Approx(1.0 / (beta + j + 1)).epsilon(1e-12));
    }
  }
  CHECK_THROWS(gauss_jacobi01(4, -1.0));
}

TEST_CASE("duffy triangle rule") {
  TriQuad q = duffy_rule(5);
  auto mono = [&](int a, int b) {
    double s = 0;
    for (const auto& p : q.pts) s += p.w * std::pow(p.l1, a) * std::pow(p.l2, b);
    return s;
  };
  auto exact = [](int a, int b) {
    // int_T l1^a l2^b = a! b! / (a+b+2)!
    double num = std::tgamma(a + 1.0) * std::tgamma(b + 1.0);
    return num / std::tgamma(a + b + 3.0);
  };
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4 - a; ++b)
      CHECK(mono(a, b) == doctest::Approx(exact(a, b)).epsilon(1e-13));
}

TEST_CASE("singular duffy rule integrates r^beta") {
  // triangle with the singular vertex at the origin
  Mesh m;
  m.vertices = {Complex(0, 0), Complex(1, 0), Complex(0, 1)};
  m.triangles = {{0, 1, 2}};
  double beta = -1.5;
  PhysQuad q = duffy_singular_rule(m, 0, 0, beta, 16);
  double s = 0;
  for (std::size_t i = 0; i < q.pts.size(); ++i) s += q.w[i] * std::pow(std::abs(q.pts[i]), beta);
  // reference: int_0^{pi/2} int_0^{1/(cos+sin)} r^{beta+1} dr dtheta
  GaussRule gl = gauss_legendre(200);
  double ref = 0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    double th = 0.5 * kPi * gl.x[i];
    double R = 1.0 / (std::cos(th) + std::sin(th));
    ref += 0.5 * kPi * gl.w[i] * std::pow(R, beta + 2) / (beta + 2);
  }
  CHECK(s == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("model area and boundary length through the singular scheme") {
  Divisor d = reference_divisor();
  Setup s1(d, 0.2, 8), s2(d, 0.1, 8);
  auto one_b = [](const BulkQP&) { return 1.0; };
  auto one_s = [](const BdryQP&) { return 1.0; };
  double a1 = s1.quad.integrate_bulk(s1.quad.hi_smooth(), one_b);
  double a2 = s2.quad.integrate_bulk(s2.quad.hi_smooth(), one_b);
  CHECK(std::abs(a1 - 2 * kPi) < 2e-2);
  CHECK(std::abs(a2 - 2 * kPi) < 0.35 * std::abs(a1 - 2 * kPi) + 1e-12);
  double l1 = s1.quad.integrate_bdry(s1.quad.hi_smooth(), one_s);
  CHECK(l1 == doctest::Approx(2 * kPi).epsilon(1e-9));
}

TEST_CASE("patch handles the registered r^2a singularity to high accuracy") {
  Divisor d = reference_divisor();
  Setup s(d, 0.15, 8);
  const auto& pi = s.quad.patches()[0];  // bulk puncture at i
  REQUIRE(!pi.boundary);
  double a = -0.75, R = pi.R;
  // radial profile (half-plane polar) supported on the pure-patch half;
  // e^{-2 w0} cancels the volume factor so the closed form is a Beta integral
  auto f = [&](const BulkQP& q) {
    double r = std::abs(q.x - pi.z_half);
    double t = 2.0 * r / R;
    if (t >= 1) return 0.0;
    double rho = std::pow(1 - t * t, 6);
    return std::pow(r, 2 * a) * rho / metric_factor(q.x);
  };
  double got = s.quad.integrate_bulk(s.quad.hi(), f);
  // 2 pi (R/2)^{2a+2} * (1/2) B(a+1, 7)
  double exact = 2 * kPi * std::pow(0.5 * R, 2 * a + 2) * 0.5 * std::tgamma(a + 1.0) *
                 std::tgamma(7.0) / std::tgamma(a + 8.0);
  CHECK(got == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("odd angular harmonics cancel structurally on the patch") {
  Divisor d = reference_divisor();
  Setup s(d, 0.15, 8);
  const auto& pi = s.quad.patches()[0];
  double scale = 0;
  for (int m = 1; m <= 3; ++m) {
    double sr = 0, si = 0;
    for (const auto& q : s.quad.hi().bulk) {
      double r = std::abs(q.x - pi.z_half);
      if (q.patch != 0 || r >= 0.5 * pi.R) continue;  // pure-patch region
      double th = std::arg(q.x - pi.z_half);
      double radial = std::pow(r, 2 * -0.75) * std::exp(-r) / metric_factor(q.x);
      sr += q.W0 * radial * std::cos(m * th);
      si += q.W0 * radial * std::sin(m * th);
      scale = std::max(scale, std::abs(q.W0 * radial));
    }
    CHECK(std::abs(sr) < 1e-12 * std::max(1.0, scale));
    CHECK(std::abs(si) < 1e-12 * std::max(1.0, scale));
  }
}

TEST_CASE("principal value mechanism for 1/(x - z_k) kernels") {
  Divisor d = reference_divisor();
  Setup s(d, 0.15, 8);
  const auto& pi = s.quad.patches()[0];
  Complex zk(0, 1);
  double sr = 0, si = 0, amp = 0;
  for (const auto& q : s.quad.hi().bulk) {
    double r = std::abs(q.x - zk);
    if (q.patch != 0 || r >= 0.5 * pi.R) continue;
    Complex ker = 1.0 / (q.x - zk);
    double radial = std::pow(r, 2 * -0.75) * (1.0 + r * r) / metric_factor(q.x);
    sr += q.W0 * radial * ker.real();
    si += q.W0 * radial * ker.imag();
    amp += std::abs(q.W0 * radial * ker.real());
  }
  // structural cancellation: zero in exact arithmetic, so the survivor is
  // pure floating-point residue relative to the summed magnitude
  CHECK(std::abs(sr) < 1e-12 * amp);
  CHECK(std::abs(si) < 1e-12 * amp);
}

TEST_CASE("boundary line patch integrates |t-s|^b against the closed form") {
  Divisor d = reference_divisor();
  Setup s(d, 0.15, 8);
  // boundary puncture at t = 0 has line exponent b = -0.75
  const PatchInfo* pl = nullptr;
  for (const auto& p : s.quad.patches())
    if (p.boundary && std::abs(p.z_real) < 1e-14) pl = &p;
  REQUIRE(pl != nullptr);
  double b = -0.75, R = pl->R;
  auto f = [&](const BdryQP& q) {
    if (q.t_inf) return 0.0;
    double tau = std::abs(q.t - pl->z_real);
    double t = 2.0 * tau / R;
    if (t >= 1) return 0.0;
    double rho = std::pow(1 - t * t, 6);
    return std::pow(tau, b) * rho / std::exp(conformal_exponent(Complex(q.t, 0)));
  };
  double got = s.quad.integrate_bdry(s.quad.hi(), f);
  double exact = 2.0 * std::pow(0.5 * R, b + 1) * 0.5 * std::tgamma((b + 1) / 2.0) *
                 std::tgamma(7.0) / std::tgamma((b + 1) / 2.0 + 7.0);
  CHECK(got == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("linearity and positive homogeneity") {
  Divisor d = reference_divisor();
  Setup s(d, 0.2, 6);
  auto f1 = [](const BulkQP& q) { return std::cos(q.w.real()); };
  auto f2 = [](const BulkQP& q) { return q.w.imag() * q.w.imag(); };
  double a = s.quad.integrate_bulk(s.quad.hi(), f1);
  double b = s.quad.integrate_bulk(s.quad.hi(), f2);
  double ab = s.quad.integrate_bulk(
      s.quad.hi(), [&](const BulkQP& q) { return 2.0 * f1(q) - 3.5 * f2(q); });
  CHECK(ab == doctest::Approx(2.0 * a - 3.5 * b).epsilon(1e-12));
}

TEST_CASE("smooth integrand convergence and the nested error estimate") {
  Divisor d = reference_divisor();
  auto smooth_b = [](const BulkQP& q) {
    return std::exp(0.8 * q.w.real()) * std::cos(1.3 * q.w.imag());
  };
  double vals[3], hs[3] = {0.24, 0.12, 0.06};
  for (int i = 0; i < 3; ++i) {
    Setup s(d, hs[i], 6);
    vals[i] = s.quad.integrate_bulk(s.quad.hi(), smooth_b);
  }
  Setup fine(d, 0.04, 6);
  double ref = fine.quad.integrate_bulk(fine.quad.hi(), smooth_b);
  double e0 = std::abs(vals[0] - ref), e1 = std::abs(vals[1] - ref), e2 = std::abs(vals[2] - ref);
  double rate1 = std::log2(e0 / e1), rate2 = std::log2(e1 / e2);
  CHECK(std::min(rate1, rate2) > 1.7);  // nominal >= 2 for the boundary-limited part
  // nested-rule difference bounds the truth within a modest factor
  Setup s(d, 0.12, 6);
  double hi = s.quad.integrate_bulk(s.quad.hi(), smooth_b);
  double lo = s.quad.integrate_bulk(s.quad.lo(), smooth_b);
  CHECK(std::abs(hi - lo) < 0.05);
}

TEST_CASE("probe quadrature partition of unity") {
  Divisor d = reference_divisor();
  Setup s(d, 0.15, 8);
  Complex probe_half(-1.1, 0.9);
  double R = 0.12;
  auto smooth = [](Complex w) { return std::exp(w.real()) * (1.0 + w.imag() * w.imag()); };
  double full = s.quad.integrate_bulk(s.quad.hi(),
                                      [&](const BulkQP& q) { return smooth(q.w); });
  auto pq = s.quad.make_probe_quad(probe_half, R, 10, 24, 2);
  double total = 0;
  for (const auto& q : s.quad.hi().bulk)
    if (q.patch >= 0 || !pq.replaced_elem[q.elem]) total += q.W0 * smooth(q.w);
  for (const auto& q : pq.band) total += q.W0 * smooth(q.w);
  for (const auto& q : pq.patch) total += q.W0 * smooth(q.w);
  CHECK(total == doctest::Approx(full).epsilon(1e-5));
  // probes inside puncture patches are rejected
  CHECK_THROWS(s.quad.probe_patch(Complex(0, 1.01), 0.05, 6, 12));
}
