#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liouville/rng.hpp"
#include "liouville/solver.hpp"

using namespace liouville;

namespace {
SolverOptions coarse_opt() {
  SolverOptions o;
  o.target_h = 0.18;
  o.grading_depth = 8;
  o.quad.far_n = 3;
  o.quad.n_r = 20;
  o.quad.n_theta = 32;
  o.quad.n_r_line = 18;
  return o;
}
}  // namespace

TEST_CASE("singular part values and decomposition") {
  Divisor d{{{PunctureKind::Bulk, {0, 1}, -0.75}}};
  // H(x) = -2 a G0(x, z): at x = 2i, z = i
  CHECK(h_field(d, Complex(0, 2)) ==
        doctest::Approx(-2.0 * -0.75 * green(Complex(0, 2), Complex(0, 1))).epsilon(1e-13));
  CHECK(h_field(d, Complex(0, 2)) == doctest::Approx(-1.773483).epsilon(1e-5));
  CHECK(h_field(Divisor{}, Complex(0.3, 0.4)) == 0.0);
  // near the puncture H - 2a ln|x-z| stays bounded with vanishing oscillation
  double prev_osc = 1e9;
  for (double r : {1e-2, 1e-4, 1e-6}) {
    double mn = 1e18, mx = -1e18;
    for (int j = 0; j < 16; ++j) {
      Complex x = Complex(0, 1) + r * std::polar(1.0, 2 * kPi * j / 16.0);
      double v = h_field(d, x) - 2.0 * -0.75 * std::log(std::abs(x - Complex(0, 1)));
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      CHECK(std::abs(v - h_smooth(d, 0, x)) < 1e-10);
    }
    CHECK(mx - mn < prev_osc + 1e-14);
    prev_osc = mx - mn;
  }
  CHECK(prev_osc < 1e-3);
}

TEST_CASE("reference solve: basics, Gauss-Bonnet, residuals") {
  ProblemSpec spec = reference_spec();
  Solution sol = solve(spec, coarse_opt());
  CHECK(sol.gradient_norm <= 1e-10);
  CHECK(sol.newton_iterations < 40);
  CHECK(!sol.overflow_flag);
  // Gauss-Bonnet: (1/4pi) int Lambda e^Phi + (1/2pi) int sigma e^{Phi/2} = -chi
  CHECK(sol.gauss_bonnet_defect() < 1e-3);
  CHECK(sol.gauss_bonnet_defect() < 10 * sol.quadrature_error + 1e-3);
  ResidualReport rr = residual_check(sol);
  CHECK(rr.interior_norm < 1e-9);
  CHECK(rr.boundary_norm < 1e-9);  // <= 10 tol
  // perturbing the solution grows the residual by the perturbation scale
  Solution pert = sol;
  Vec bump = Vec::Zero(sol.varphi.size());
  for (int i = 0; i < bump.size(); ++i)
    bump[i] = 0.1 * std::exp(-10 * std::norm(sol.disc->space.dof_point[i] - Complex(0.3, 0.2)));
  pert.varphi += bump;
  ResidualReport rp = residual_check(pert);
  CHECK(rp.interior_norm > 1e3 * rr.interior_norm);
}

TEST_CASE("energy at zero field matches a brute-force oracle") {
  ProblemSpec spec = reference_spec();
  auto disc = Disc::build(spec.divisor, coarse_opt());
  EnergyModel em{disc, spec, build_tables(*disc, spec), spec.divisor.chi()};
  double e0 = em.energy(Vec::Zero(disc->space.n_dofs));
  // brute force: fine polar sums around each puncture plus a cartesian grid
  // for (Lambda/2pi) int e^H dv0 + (2/pi) int sigma e^{H/2} dl0 on the disk
  double bulk = 0;
  int N = 700;
  double hgrid = 2.0 / N;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Complex w(-1 + (i + 0.5) * hgrid, -1 + (j + 0.5) * hgrid);
      if (std::abs(w) > 1.0) continue;
      double near = 1e9;
      for (const auto& p : spec.divisor.punctures)
        near = std::min(near, std::abs(w - cayley(p.location)));
      if (near < 0.04) continue;  // polar patches cover these
      bulk += hgrid * hgrid * disk_metric_factor(w) * std::exp(h_field(spec.divisor, cayley_inv(w)));
    }
  for (const auto& p : spec.divisor.punctures) {
    Complex pc = cayley(p.location);
    int nr = 4000, nt = 64;
    for (int i = 1; i <= nr; ++i)
      for (int j = 0; j < nt; ++j) {
        double r = 0.04 * (i - 0.5) / nr;
        double th = 2 * kPi * (j + 0.5) / nt;
        Complex w = pc + std::polar(r, th);
        if (std::abs(w) > 1.0) continue;
        double near = 1e9;
        for (const auto& q : spec.divisor.punctures)
          near = std::min(near, std::abs(w - cayley(q.location)));
        if (near < std::abs(w - pc) - 1e-12) continue;  // belongs to the other patch
        bulk += (0.04 / nr) * (2 * kPi / nt) * r * disk_metric_factor(w) *
                std::exp(h_field(spec.divisor, cayley_inv(w)));
      }
  }
  double expect_bulk = spec.Lambda / (2 * kPi) * bulk;
  // boundary: integrate sigma e^{H/2} over the circle in angle
  double bdry = 0;
  int NB = 400000;
  for (int i = 0; i < NB; ++i) {
    double th = 2 * kPi * (i + 0.5) / NB;
    Complex w = std::polar(1.0, th);
    Complex x = cayley_inv(w);
    bdry += (2 * kPi / NB) * std::exp(disk_metric_exponent(w)) *
            std::exp(0.5 * h_field(spec.divisor, Complex(x.real(), 0.0)));
  }
  double expect = expect_bulk + 2.0 / kPi * bdry;  // sigma = 1
  CHECK(e0 == doctest::Approx(expect).epsilon(2e-2));
}

TEST_CASE("strict convexity and stationarity in the constant direction") {
  ProblemSpec spec = reference_spec();
  SolverOptions o = coarse_opt();
  o.target_h = 0.25;
  o.grading_depth = 6;
  auto disc = Disc::build(spec.divisor, o);
  EnergyModel em{disc, spec, build_tables(*disc, spec), spec.divisor.chi()};
  Rng rng(3);
  const int n = disc->space.n_dofs;
  for (int trial = 0; trial < 10; ++trial) {
    Vec u1(n), u2(n);
    for (int i = 0; i < n; ++i) {
      Complex w = disc->space.dof_point[i];
      u1[i] = 0.5 * std::sin(3 * w.real() + trial) + rng.uniform(-0.01, 0.01);
      u2[i] = 0.4 * std::cos(2 * w.imag() - trial);
    }
    double mid = em.energy(0.5 * (u1 + u2));
    CHECK(mid < 0.5 * (em.energy(u1) + em.energy(u2)) + 1e-12);
  }
  Solution sol = solve_on_disc(disc, spec, o);
  // d/dt I(phi + t) = 0 at the minimizer (Euler-Lagrange of the c-term)
  double h = 1e-6;
  Vec ones = Vec::Ones(n);
  double dd = (em.energy(sol.varphi + h * ones) - em.energy(sol.varphi - h * ones)) / (2 * h);
  CHECK(std::abs(dd) < 1e-7);
}

TEST_CASE("uniqueness: two starts land on the same minimizer") {
  ProblemSpec spec = reference_spec();
  SolverOptions o = coarse_opt();
  o.target_h = 0.22;
  o.grading_depth = 6;
  auto disc = Disc::build(spec.divisor, o);
  Solution a = solve_on_disc(disc, spec, o);
  Vec rough(disc->space.n_dofs);
  Rng rng(17);
  for (int i = 0; i < rough.size(); ++i) {
    Complex w = disc->space.dof_point[i];
    rough[i] = 1.5 * std::sin(4 * w.real()) * std::cos(3 * w.imag()) + rng.uniform(-0.2, 0.2);
  }
  Solution b = solve_on_disc(disc, spec, o, &rough);
  CHECK(std::abs(a.energy_value - b.energy_value) < 1e-8);
  CHECK((a.varphi - b.varphi).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("manufactured solution is recovered at the element order") {
  Divisor d = reference_spec().divisor;
  Manufactured mf = manufactured_oracle(d, 42);
  double errs[3], hs[3] = {0.2, 0.1, 0.05};
  for (int i = 0; i < 3; ++i) {
    SolverOptions o = coarse_opt();
    o.target_h = hs[i];
    o.grading_depth = 4;
    Solution sol = solve_manufactured(mf, d, o);
    double mean_exact = 0, mean_fe = sol.mean_c;
    // compare up to the shared mean (both fields solve the same EL)
    double wsum = 0;
    for (int k = 0; k < sol.disc->space.n_dofs; ++k) {
      double wq = sol.disc->ops.bulk_mass.diagonal()[k];
      mean_exact += wq * mf.phi_hat(sol.disc->space.dof_point[k]);
      wsum += wq;
    }
    mean_exact /= wsum;
    (void)mean_fe;
    double emax = 0;
    Rng rng(5);
    for (int p = 0; p < 200; ++p) {
      Complex w(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9));
      if (std::abs(w) > 0.9) continue;
      double diff = sol.varphi_at(w) - mf.phi_hat(w);
      emax = std::max(emax, std::abs(diff));
    }
    errs[i] = emax;
  }
  double rate1 = std::log2(errs[0] / errs[1]);
  double rate2 = std::log2(errs[1] / errs[2]);
  INFO("errors ", errs[0], " ", errs[1], " ", errs[2], " rates ", rate1, " ", rate2);
  CHECK(errs[2] < errs[1]);
  CHECK(errs[1] < errs[0]);
  CHECK(std::min(rate1, rate2) >= 1.7);
  // minimality spot check against random perturbations
  SolverOptions o = coarse_opt();
  o.target_h = 0.2;
  o.grading_depth = 4;
  Solution sol = solve_manufactured(mf, d, o);
  EnergyModel em{sol.disc, sol.spec, sol.tables, d.chi()};
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    Vec p(sol.varphi.size());
    for (int i = 0; i < p.size(); ++i) p[i] = rng.uniform(-0.05, 0.05);
    CHECK(em.energy(sol.varphi + p) >= em.energy(sol.varphi) - 1e-12);
  }
}

TEST_CASE("key formula consistency at probe points") {
  ProblemSpec spec = reference_spec();
  Solution sol = solve(spec, coarse_opt());
  double dev = consistency_identity(sol, 12, 2024);
  INFO("deviation ", dev, " quad err ", sol.quadrature_error);
  CHECK(dev <= std::max(10 * sol.quadrature_error, 2e-3));
  // a wrong constant breaks the identity by about 1
  Solution wrong = sol;
  wrong.mean_c += 1.0;
  double dev1 = consistency_identity(wrong, 4, 2024);
  CHECK(dev1 > 0.5);
  CHECK(dev1 < 1.5);
}

TEST_CASE("regularized solve: mask structure on the reference configuration") {
  ProblemSpec spec = reference_spec();
  SolverOptions o = coarse_opt();
  o.target_h = 0.16;
  auto disc = Disc::build(spec.divisor, o);
  ProblemSpec rs = spec;
  rs.reg = RegMask{0.1, 0.1};
  Solution r = solve_on_disc(disc, rs, o);
  CHECK(r.gradient_norm <= 1e-10);
  // the masked problem still balances Gauss-Bonnet (same divisor)
  CHECK(r.gauss_bonnet_defect() < 1e-3);
  // curvature is excluded exactly within the inner mask radius: no bulk table
  // entry survives inside eps - band of a puncture or delta - band of the edge
  double inner = 0.1 - 0.1 * 0.1;
  for (const auto& p : r.tables->bulk) {
    Complex w = cayley(p.x);
    for (const auto& pc : spec.divisor.punctures)
      CHECK(geodesic_distance(w, cayley(pc.location)) >= inner - 1e-9);
    CHECK(std::abs(kPi / 2 - geodesic_distance(w, Complex(0, 0))) >= inner - 1e-9);
  }
}

TEST_CASE("regularized solve: H1 trend on a mild bulk-only configuration") {
  // bulk weights -1/4: the masked Lambda-mass scales like eps^{3/2}, so the
  // trend is visible at desk scale (corner weights -3/4 converge like
  // eps^{1/4} and are exercised through the action module instead)
  ProblemSpec spec;
  spec.divisor.punctures = {{PunctureKind::Bulk, {0, 1}, -0.25},
                            {PunctureKind::Bulk, {1.2, 1.3}, -0.25},
                            {PunctureKind::Bulk, {-1.1, 0.8}, -0.25},
                            {PunctureKind::Bulk, {0.3, 2.2}, -0.25},
                            {PunctureKind::Bulk, {-0.5, 1.7}, -0.25}};
  spec.Lambda = 2.0;
  spec.sigma_arcs = {0.3};
  SolverOptions o = coarse_opt();
  o.target_h = 0.16;
  o.grading_depth = 6;
  auto disc = Disc::build(spec.divisor, o);
  Solution plain = solve_on_disc(disc, spec, o);
  const SpMat& K = disc->ops.stiffness;
  double prev = 1e18;
  for (double eps : {0.2, 0.1, 0.05}) {
    ProblemSpec rs = spec;
    rs.reg = RegMask{eps, eps};
    Solution r = solve_on_disc(disc, rs, o, &plain.varphi);
    Vec diff = r.varphi - plain.varphi;
    double h1 = std::sqrt(diff.dot(K * diff) + diff.dot(disc->ops.bulk_mass * diff));
    CHECK(h1 < prev + 1e-12);
    prev = h1;
  }
  CHECK(prev < 0.25);
}

TEST_CASE("isometry equivariance of the solve") {
  ProblemSpec spec = reference_spec();
  SolverOptions o = coarse_opt();
  o.target_h = 0.14;
  o.grading_depth = 9;
  double theta = 0.17;
  ProblemSpec moved = transform_spec(spec, theta);
  Solution s1 = solve(spec, o);
  Solution s2 = solve(moved, o);
  // scalar diagnostics agree
  CHECK(std::abs(s1.bulk_mass - s2.bulk_mass) < 2e-3 * (1 + std::abs(s1.bulk_mass)));
  CHECK(std::abs(s1.bdry_mass - s2.bdry_mass) < 2e-3 * (1 + std::abs(s1.bdry_mass)));
  // transported field values agree: Phi'(Tx) = Phi(x) - 2 ln |T'(x)|
  Rng rng(31);
  double worst = 0;
  for (int i = 0; i < 8; ++i) {
    Complex x(rng.uniform(-1.2, 1.2), rng.uniform(0.3, 1.6));
    Complex tx = half_plane_isometry(theta, x);
    double c = std::cos(theta), s = std::sin(theta);
    Complex den = s * x + c;
    double log_tp = -2.0 * std::log(std::abs(den));  // ln |T'| with T' = 1/den^2
    double lhs = s2.Phi(tx);
    double rhs = s1.Phi(x) - 2.0 * log_tp;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("weighted pairing: Gauss-Bonnet tie and linearity") {
  ProblemSpec spec = reference_spec();
  Solution sol = solve(spec, coarse_opt());
  auto one = [](Complex) { return 1.0; };
  auto one_b = [](double, bool) { return 1.0; };
  auto zero = [](Complex) { return 0.0; };
  auto zero_b = [](double, bool) { return 0.0; };
  double p1 = weighted_pairing(sol, one, one_b);
  CHECK(weighted_pairing(sol, zero, zero_b) == 0.0);
  // <1> = -chi - (1/4pi) int sigma dl*
  double sig_len = sol.bdry_mass;  // sigma = 1 on both arcs
  CHECK(p1 == doctest::Approx(-spec.divisor.chi() - sig_len / (4 * kPi)).epsilon(5e-3));
  auto f = [](Complex x) { return std::cos(x.real()) / (1.0 + std::norm(x)); };
  auto fb = [](double t, bool inf) { return inf ? 0.0 : std::cos(t) / (1.0 + t * t); };
  double a = weighted_pairing(sol, f, fb);
  double b = weighted_pairing(
      sol, [&](Complex x) { return 2.0 * f(x) + 1.0; },
      [&](double t, bool inf) { return 2.0 * fb(t, inf) + 1.0; });
  CHECK(b == doctest::Approx(2.0 * a + p1).epsilon(1e-10));
}

TEST_CASE("solver input validation") {
  ProblemSpec bad = reference_spec();
  bad.divisor.punctures[0].weight = 0.4;  // chi >= 0
  CHECK_THROWS(solve(bad, coarse_opt()));
  ProblemSpec neg = reference_spec();
  neg.sigma_arcs = {1.0, -0.2};
  CHECK_THROWS(solve(neg, coarse_opt()));
  ProblemSpec regbad = reference_spec();
  regbad.reg = RegMask{0.5, 0.5};  // eps too large vs min pair distance
  CHECK_THROWS(solve(regbad, coarse_opt()));
}
