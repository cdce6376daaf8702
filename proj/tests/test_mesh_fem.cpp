#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "liouville/fem.hpp"
#include "liouville/mesh.hpp"
#include "liouville/rng.hpp"

using namespace liouville;

namespace {
Divisor reference_divisor() {
  return Divisor{{{PunctureKind::Bulk, {0, 1}, -0.75},
                  {PunctureKind::Boundary, {0, 0}, -0.75},
                  {PunctureKind::Boundary, {1, 0}, -0.75}}};
}
}  // namespace

TEST_CASE("plain disk mesh: quality and scaling") {
  int counts[3];
  double hs[3] = {0.2, 0.1, 0.05};
  for (int i = 0; i < 3; ++i) {
    Mesh m = build_mesh(Divisor{}, hs[i], 0);
    counts[i] = m.num_vertices();
    CHECK(m.min_angle_deg() >= 20.0);
    for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle_area(t) > 0);
    // boundary edges cover the circle exactly once
    double span = 0;
    for (const auto& e : m.boundary_edges) {
      double a0 = std::atan2(m.vertices[e.a].imag(), m.vertices[e.a].real());
      double a1 = std::atan2(m.vertices[e.b].imag(), m.vertices[e.b].real());
      while (a1 <= a0) a1 += 2 * kPi;
      span += a1 - a0;
    }
    CHECK(span == doctest::Approx(2 * kPi).epsilon(1e-12));
  }
  double g1 = double(counts[1]) / counts[0], g2 = double(counts[2]) / counts[1];
  CHECK(g1 > 2.4);  // ~4x per halving
  CHECK(g1 < 6.5);
  CHECK(g2 > 2.8);
  CHECK(g2 < 6.0);
}

TEST_CASE("graded mesh around punctures") {
  Divisor d = reference_divisor();
  int depth = 8;
  Mesh m = build_mesh(d, 0.15, depth);
  REQUIRE(m.puncture_vertex.size() == 3);
  for (int k = 0; k < 3; ++k) {
    int v = m.puncture_vertex[k];
    CHECK(std::abs(m.vertices[v] - m.puncture_disk[k]) < 1e-14);
    // deep grading: smallest incident edge reaches h * 2^-depth scale
    double mn = 1e9;
    for (int t : m.vertex_star(v)) mn = std::min(mn, m.longest_edge(t));
    CHECK(mn <= 0.15 * std::pow(0.5, depth) * 3.0);
    CHECK(mn > 0.15 * std::pow(0.5, depth + 4));
  }
  CHECK(m.min_angle_deg() >= 20.0);
  CHECK(m.num_arcs == 2);
  // sigma arcs split exactly at the boundary punctures: every boundary edge
  // endpoint pair on different arcs must be a puncture vertex
  for (const auto& e1 : m.boundary_edges)
    for (const auto& e2 : m.boundary_edges) {
      if (e1.b == e2.a && e1.arc != e2.arc) {
        bool is_puncture = false;
        for (int pv : m.puncture_vertex) is_puncture |= pv == e1.b;
        CHECK(is_puncture);
      }
    }
}

TEST_CASE("close punctures policy") {
  Divisor d{{{PunctureKind::Bulk, {0, 1}, -0.6}, {PunctureKind::Bulk, {0.05, 1}, -0.6}}};
  MeshOptions opt;
  opt.error_on_close_punctures = true;
  CHECK_THROWS(build_mesh(d, 0.2, 4, opt));
  MeshOptions ok;
  Mesh m = build_mesh(d, 0.2, 4, ok);  // refine instead of erroring
  CHECK(m.num_vertices() > 0);
}

TEST_CASE("mesh export import round trip") {
  Mesh m = build_mesh(reference_divisor(), 0.2, 4);
  std::stringstream ss;
  write_mesh(ss, m);
  Mesh r = read_mesh(ss);
  CHECK(r.num_vertices() == m.num_vertices());
  CHECK(r.num_triangles() == m.num_triangles());
  CHECK(r.boundary_edges.size() == m.boundary_edges.size());
  CHECK(std::abs(r.vertices[5] - m.vertices[5]) < 1e-15);
  CHECK(r.puncture_vertex == m.puncture_vertex);
}

TEST_CASE("morph relocates punctures smoothly") {
  Divisor d = reference_divisor();
  Mesh m = build_mesh(d, 0.15, 6);
  // bulk shift
  Mesh mb = morph_mesh(m, 0, Complex(0.01, 1.005));
  CHECK(std::abs(mb.vertices[mb.puncture_vertex[0]] - cayley(Complex(0.01, 1.005))) < 1e-14);
  CHECK(mb.num_triangles() == m.num_triangles());
  CHECK(mb.min_angle_deg() >= 15.0);
  // boundary shift stays on the circle
  Mesh ms = morph_mesh(m, 1, Complex(0.02, 0));
  CHECK(std::abs(ms.vertices[ms.puncture_vertex[1]] - cayley(Complex(0.02, 0))) < 1e-14);
  for (int v = 0; v < ms.num_vertices(); ++v)
    if (ms.boundary_vertex[v])
      CHECK(std::abs(std::abs(ms.vertices[v]) - 1.0) < 1e-12);
  // untouched punctures stay put
  CHECK(std::abs(ms.vertices[ms.puncture_vertex[0]] - m.vertices[m.puncture_vertex[0]]) == 0.0);
}

TEST_CASE("P2 space reproduces quadratics exactly") {
  Mesh m = build_mesh(Divisor{}, 0.25, 0);
  FeSpace s = FeSpace::build(m, 2);
  CHECK(s.n_dofs > m.num_vertices());
  Locator loc(m);
  FieldEval ev(s, loc);
  auto f = [](Complex w) {
    return 1.7 * w.real() * w.real() + 2.0 * w.real() * w.imag() - w.imag() + 3.0;
  };
  Vec u(s.n_dofs);
  for (int i = 0; i < s.n_dofs; ++i) u[i] = f(s.dof_point[i]);
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    Complex w(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    CHECK(ev.value(u, w) == doctest::Approx(f(w)).epsilon(1e-12));
    Eigen::Vector2d g = ev.gradient(u, w);
    CHECK(g[0] == doctest::Approx(3.4 * w.real() + 2.0 * w.imag()).epsilon(1e-10));
    CHECK(g[1] == doctest::Approx(2.0 * w.real() - 1.0).epsilon(1e-10));
    Eigen::Matrix2d h = ev.hessian(u, w);
    CHECK(h(0, 0) == doctest::Approx(3.4).epsilon(1e-9));
    CHECK(h(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(h(1, 1) == doctest::Approx(0.0).epsilon(1e-9));
  }
  // gradient of a constant field vanishes
  Vec c = Vec::Constant(s.n_dofs, 4.2);
  CHECK(ev.gradient(c, Complex(0.1, 0.2)).norm() < 1e-12);
}

TEST_CASE("gradient FD consistency for a smooth non-polynomial") {
  Mesh m = build_mesh(Divisor{}, 0.1, 0);
  FeSpace s = FeSpace::build(m, 2);
  Locator loc(m);
  FieldEval ev(s, loc);
  auto f = [](Complex w) { return std::sin(2 * w.real()) * std::exp(w.imag()); };
  Vec u(s.n_dofs);
  for (int i = 0; i < s.n_dofs; ++i) u[i] = f(s.dof_point[i]);
  Rng rng(9);
  for (int i = 0; i < 15; ++i) {
    Complex w(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    double hstep = 1e-5;
    double dx = (ev.value(u, w + hstep) - ev.value(u, w - hstep)) / (2 * hstep);
    Eigen::Vector2d g = ev.gradient(u, w);
    CHECK(std::abs(g[0] - dx) < 5e-3);  // h^2-level FE consistency
  }
}

TEST_CASE("assembled operators") {
  Mesh m = build_mesh(reference_divisor(), 0.2, 5);
  FeSpace s = FeSpace::build(m, 2);
  DiscreteOperators ops = assemble(s);
  // constants in the stiffness kernel
  Vec ones = Vec::Ones(s.n_dofs);
  Vec r = ops.stiffness * ones;
  CHECK(r.cwiseAbs().maxCoeff() < 1e-11);
  // Dirichlet energy of the linear field w1 equals the polygon area
  Vec lin(s.n_dofs);
  for (int i = 0; i < s.n_dofs; ++i) lin[i] = s.dof_point[i].real();
  double poly_area = 0;
  for (int t = 0; t < m.num_triangles(); ++t) poly_area += m.triangle_area(t);
  CHECK(lin.dot(ops.stiffness * lin) == doctest::Approx(poly_area).epsilon(1e-9));
  // hemisphere area 2*pi within the polygonal defect, improving on refinement
  double a1 = ops.lumped_bulk.sum();
  CHECK(std::abs(a1 - 2 * kPi) < 0.02);
  Mesh m2 = build_mesh(reference_divisor(), 0.1, 5);
  FeSpace s2 = FeSpace::build(m2, 2);
  DiscreteOperators ops2 = assemble(s2);
  double a2 = ops2.lumped_bulk.sum();
  CHECK(std::abs(a2 - 2 * kPi) < 0.3 * std::abs(a1 - 2 * kPi) + 1e-12);
  // boundary length 2*pi, arc-corrected so this is near-exact, split per arc
  Vec ones2 = Vec::Ones(s2.n_dofs);
  double len = 0;
  for (const auto& bm : ops2.boundary_mass) len += (bm * ones2).sum();
  CHECK(len == doctest::Approx(2 * kPi).epsilon(1e-10));
  CHECK(ops2.boundary_mass.size() == 2);
}
