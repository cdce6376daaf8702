#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "liouville/descendants.hpp"
#include "liouville/rng.hpp"

using namespace liouville;

namespace {

SolverOptions test_opt() {
  SolverOptions o;
  o.target_h = 0.12;
  o.grading_depth = 10;
  o.quad.n_r = 24;
  o.quad.n_theta = 40;
  o.quad.n_r_line = 22;
  return o;
}

struct Fixture {
  Solution sol;
  std::unique_ptr<IntegralEngine> eng;
  DescendantReport rep;
};

const Fixture& reference_fixture() {
  static Fixture f = [] {
    Fixture fx;
    fx.sol = solve(reference_spec(), test_opt());
    fx.eng = std::make_unique<IntegralEngine>(fx.sol);
    fx.rep = accessory_parameters(*fx.eng);
    return fx;
  }();
  return f;
}

}  // namespace

TEST_CASE("spectator entries carry vanishing descendants") {
  ProblemSpec spec;
  spec.divisor.punctures = {{PunctureKind::Bulk, {0, 1}, -0.8},
                            {PunctureKind::Bulk, {0.9, 1.6}, -0.5},
                            {PunctureKind::Bulk, {-1.0, 0.8}, 0.0},
                            {PunctureKind::Boundary, {0.3, 0}, 0.0}};
  spec.Lambda = 2.0;
  spec.sigma_arcs = {0.8};  // continuous sigma at the weight-0 boundary point
  SolverOptions o = test_opt();
  o.target_h = 0.16;
  o.grading_depth = 8;
  Solution sol = solve(spec, o);
  IntegralEngine eng(sol);
  DescendantReport rep = accessory_parameters(eng);
  for (const auto& e : rep.entries) {
    if (e.c != 0.0) continue;
    CHECK(std::abs(e.l1) <= std::max(10.0 * e.l1_error, 1e-10));
    CHECK(e.delta == 0.0);
  }
  // the stress model omits the spectators
  StressTensorModel T = stress_tensor(rep);
  CHECK(T.poles.size() == 4);  // z, conj z for the two weighted bulk punctures
}

TEST_CASE("conjugation consistency of bulk descendants") {
  const auto& fx = reference_fixture();
  // entry 0 = z, entry 1 = conj z by construction; recompute l1 at the
  // conjugate entry directly through the kernel machinery
  double err = 0;
  Complex direct_conj = l1_bulk(*fx.eng, 1, &err);
  CHECK(std::abs(direct_conj - std::conj(fx.rep.entries[0].l1)) <=
        std::max(20.0 * err, 1e-8));
}

TEST_CASE("bulk descendant: integral vs field-differentiation routes") {
  const auto& fx = reference_fixture();
  double e1 = 0, e2 = 0;
  Complex via_int = l1_bulk(*fx.eng, 0, &e1);
  Complex via_fe = l1_bulk_direct(fx.sol, 0, &e2);
  INFO("integral ", via_int.real(), "+", via_int.imag(), "i  fe ", via_fe.real(), "+",
       via_fe.imag(), "i  errs ", e1, " ", e2);
  CHECK(std::abs(via_int - via_fe) <= 10.0 * (e1 + e2) + 5e-3);
}

TEST_CASE("boundary descendant: defining-limit r-independence diagnostic") {
  const auto& fx = reference_fixture();
  SolverOptions o = test_opt();
  for (std::size_t i = 0; i < fx.rep.entries.size(); ++i) {
    const auto& e = fx.rep.entries[i];
    if (!e.boundary) continue;
    double e1 = 0, e2 = 0;
    double v1 = l1_boundary(*fx.eng, (int)i, 0.2, o, &e1);
    double v2 = l1_boundary(*fx.eng, (int)i, 0.1, o, &e2);
    double tol = 10.0 * std::max({e1, e2, e.l1_error});
    INFO("entry ", i, ": limit(r)=", v1, " limit(r/2)=", v2, " report=", e.l1.real(),
         " errs ", e1, " ", e2, " ", e.l1_error);
    CHECK(std::abs(v1 - v2) <= tol);
    // the slow defining limit brackets the reported residue-based value
    CHECK(std::abs(v2 - e.l1.real()) <= tol);
  }
}

TEST_CASE("closed form with the sigma-jump term for nonnegative weights") {
  // boundary spectator with a sigma jump: L_{-1} = (sigma_+ - sigma_-)/pi e^{Phi/2}
  ProblemSpec spec;
  spec.divisor.punctures = {{PunctureKind::Bulk, {0, 1}, -0.8},
                            {PunctureKind::Bulk, {-0.6, 1.7}, -0.45},
                            {PunctureKind::Boundary, {0.5, 0}, 0.0},
                            {PunctureKind::Boundary, {3.0, 0}, 0.0}};
  spec.Lambda = 2.0;
  spec.sigma_arcs = {1.2, 0.4};  // jump +0.8 at t = 0.5, -0.8 at t = 3
  SolverOptions o = test_opt();
  o.target_h = 0.15;
  o.grading_depth = 9;
  Solution sol = solve(spec, o);
  IntegralEngine eng(sol);
  DescendantReport rep = accessory_parameters(eng);
  int bidx = -1;
  for (std::size_t i = 0; i < rep.entries.size(); ++i)
    if (rep.entries[i].boundary && std::abs(rep.entries[i].x - Complex(0.5, 0)) < 1e-12)
      bidx = (int)i;
  REQUIRE(bidx >= 0);
  double expected = 2.0 * (1.2 - 0.4) / kPi * std::exp(0.5 * sol.Phi(Complex(0.5, 0)));
  INFO("l1 ", rep.entries[bidx].l1.real(), " expected ", expected);
  CHECK(rep.entries[bidx].l1.real() == doctest::Approx(expected).epsilon(0.04));
}

TEST_CASE("global Ward identities on the reference configuration") {
  const auto& fx = reference_fixture();
  auto res = global_ward_residuals(fx.rep);
  INFO("ward residuals ", res[0], " ", res[1], " ", res[2]);
  CHECK(res[0] <= 1e-3);
  CHECK(res[1] <= 1e-3);
  CHECK(res[2] <= 1e-3);
  // a perturbed residue breaks the n = 0 identity by about the perturbation
  DescendantReport broken = fx.rep;
  broken.entries[2].accessory += 1e-2;
  auto res2 = global_ward_residuals(broken);
  CHECK(res2[0] > 5.0 * res[0]);
}

TEST_CASE("stress tensor: rational model vs direct derivatives") {
  const auto& fx = reference_fixture();
  StressTensorModel T = stress_tensor(fx.rep);
  Rng rng(5150);
  int done = 0;
  double worst = 0;
  while (done < 10) {
    Complex z(rng.uniform(-2.5, 2.5), rng.uniform(0.3, 2.5));
    double err = 0;
    Complex td;
    try {
      td = stress_tensor_direct(*fx.eng, z, &err);
    } catch (const std::invalid_argument&) {
      continue;
    }
    Complex tr = T.evaluate(z);
    double dev = std::abs(tr - td) / (1.0 + std::abs(tr));
    worst = std::max(worst, dev);
    ++done;
    INFO("z = ", z.real(), "+", z.imag(), "i rational ", std::abs(tr), " direct ",
         std::abs(td), " rel dev ", dev, " est err ", err);
    CHECK(dev <= 1e-3);
  }
  // reality on the boundary
  for (double t : {-3.1, -0.4, 0.55, 2.2}) {
    Complex v = T.evaluate(Complex(t, 0));
    CHECK(std::abs(v.imag()) <= 1e-10 * (1.0 + std::abs(v)));
  }
  // far field decay consistent with the Ward-constrained Laurent tail
  auto sums = global_ward_sums(fx.rep);
  double M3 = 0;
  for (const auto& p : T.poles)
    M3 += std::abs(p.delta) * std::norm(p.x) * 3 + std::abs(p.residue) * std::pow(std::abs(p.x), 3);
  for (double ang : {0.3, 1.2, 2.4}) {
    Complex z = 50.0 * Complex(std::cos(ang), std::sin(ang));
    double bound = sums[0] / 50.0 + sums[1] / 2500.0 + sums[2] / 1.25e5 +
                   20.0 * (M3 + 1.0) / 6.25e6;
    CHECK(std::abs(T.evaluate(z)) <= bound);
  }
}

TEST_CASE("accessory parameters match the action derivative") {
  const auto& fx = reference_fixture();
  SolverOptions o = test_opt();
  for (int k = 0; k < 3; ++k) {
    ActionDerivative ds = action_derivative_fd(fx.sol, k, o, 1e-3, 2);
    // find the non-conjugate entry of source k
    Complex acc;
    for (const auto& e : fx.rep.entries)
      if (e.source == k && !e.conjugate) acc = e.accessory;
    double tol = 1e-3 * (1.0 + std::abs(acc)) + 10.0 * ds.error_estimate;
    INFO("k=", k, " accessory ", acc.real(), "+", acc.imag(), "i  -dS/2 ",
         -0.5 * ds.value.real(), "+", -0.5 * ds.value.imag(), "i  fd err ",
         ds.error_estimate);
    CHECK(std::abs(acc + 0.5 * ds.value) <= tol);
  }
}

TEST_CASE("local Ward identity at the bulk puncture") {
  const auto& fx = reference_fixture();
  Complex ward = l2_ward(fx.rep, 0);
  double err = 0;
  Complex direct = l2_bulk_direct(*fx.eng, 0, &err);
  double scale = std::abs(ward) + std::abs(direct) + 1.0;
  INFO("l2 ward ", ward.real(), "+", ward.imag(), "i direct ", direct.real(), "+",
       direct.imag(), "i err ", err);
  CHECK(std::abs(ward - direct) <= 1e-2 * scale);
}

TEST_CASE("level-2 value at a spectator equals the stress field combination") {
  // at a weight-0 bulk entry the Ward sum is plain rational arithmetic in the
  // other entries; cross-check against an independent evaluation
  const auto& fx = reference_fixture();
  DescendantReport ext = fx.rep;
  DescendantEntry probe;
  probe.x = Complex(0.8, 1.3);
  probe.c = 0.0;
  probe.delta = 0.0;
  probe.source = 99;
  ext.entries.push_back(probe);
  Complex ward = l2_ward(ext, (int)ext.entries.size() - 1);
  Complex check{0, 0};
  for (const auto& e : fx.rep.entries) {
    Complex d = probe.x - e.x;
    check += e.delta / (d * d) + e.l1 / (2.0 * d);
  }
  CHECK(std::abs(ward - check) <= 1e-12 * (1.0 + std::abs(check)));
}

TEST_CASE("higher equations of motion") {
  const auto& fx = reference_fixture();
  HemReport hem = hem_residuals(*fx.eng, fx.rep, 3);
  // bulk: algebraic identity of the derivative pipeline
  CHECK(hem.bulk_residual <= 1e-8 * hem.bulk_scale);
  REQUIRE(!hem.boundary.empty());
  for (const auto& p : hem.boundary) {
    INFO("t = ", p.t, " arc ", p.arc, " res(1/2,1/4) ", p.res_half_quarter, " res(2T) ",
         p.res_two, " scale ", p.scale);
    CHECK(std::abs(p.res_half_quarter) <= 8e-2 * p.scale);  // h = 0.12 noise floor
  }
  CHECK(hem.half_quarter_convention_wins);
}

TEST_CASE("boundary level-2 descendant through the regularized schedule") {
  ProblemSpec spec = reference_spec();
  SolverOptions o = test_opt();
  o.target_h = 0.15;
  o.grading_depth = 9;
  L2BoundaryResult r =
      l2_boundary_direct(spec, 1, {0.2, 0.16, 0.12, 0.09, 0.07}, o, 0.25);
  const auto& fx = reference_fixture();
  int bidx = -1;
  for (std::size_t i = 0; i < fx.rep.entries.size(); ++i)
    if (fx.rep.entries[i].boundary && std::abs(fx.rep.entries[i].x) < 1e-13) bidx = (int)i;
  REQUIRE(bidx >= 0);
  Complex ward = l2_ward(fx.rep, bidx);
  INFO("sequence ", r.sequence[0], " ", r.sequence[1], " ", r.sequence[2], " ... -> ",
       r.value, " +- ", r.uncertainty, " ward ", ward.real());
  CHECK(!r.schedule_too_coarse);
  double scale = std::abs(ward) + 1.0;
  CHECK(std::abs(r.value - ward.real()) <= 3.0 * r.uncertainty + 0.15 * scale);
  // the tail of the (1+t^2)^{-1} integral is negligible: doubling the range
  L2BoundaryResult r2 = l2_boundary_direct(spec, 1, {0.2, 0.16, 0.12}, o, 0.5);
  L2BoundaryResult r3 = l2_boundary_direct(spec, 1, {0.2, 0.16, 0.12}, o, 0.25);
  CHECK(std::abs(r2.sequence[0] - r3.sequence[0]) < 2e-2 * (1 + std::abs(r3.sequence[0])));
}
