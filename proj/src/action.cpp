#include "liouville/action.hpp"

#include <atomic>
#include <cmath>
#include <thread>
#include <stdexcept>
#include <vector>

namespace liouville {

double interaction_term(const Divisor& d) {
  double G = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& pk = d.punctures[k];
    double ak = pk.half_coefficient();
    for (std::size_t l = 0; l < d.size(); ++l) {
      if (l == k) continue;
      G += -2.0 * ak * d.punctures[l].half_coefficient() *
           green(pk.location, d.punctures[l].location);
    }
    double W = pk.kind == PunctureKind::Bulk ? diagonal_w_bulk(pk.location)
                                             : diagonal_w_boundary(pk.location);
    G += -2.0 * ak * ak * W;
  }
  return G;
}

ActionReport classical_action(const Solution& sol) {
  ActionReport r;
  const auto& disc = *sol.disc;
  const auto& s = disc.space;
  const Vec& u = sol.varphi;
  r.dirichlet = 0.25 / kPi * u.dot(disc.ops.stiffness * u);
  auto exp_terms = [&](const std::vector<ExpTables::Pt>& bulk,
                       const std::vector<ExpTables::Pt>& bdry, double& eb, double& es) {
    eb = es = 0;
    for (const auto& p : bulk) {
      double v = 0;
      const auto& ed = s.elem_dofs[p.elem];
      for (int i = 0; i < s.dofs_per_elem; ++i) v += p.shape[i] * u[ed[i]];
      eb += p.A * std::exp(v);
    }
    for (const auto& p : bdry) {
      double v = 0;
      const auto& ed = s.elem_dofs[p.elem];
      for (int i = 0; i < s.dofs_per_elem; ++i) v += p.shape[i] * u[ed[i]];
      es += p.A * std::exp(0.5 * v);
    }
  };
  double eb, es, eb_lo, es_lo;
  exp_terms(sol.tables->bulk, sol.tables->bdry, eb, es);
  exp_terms(sol.tables->bulk_lo, sol.tables->bdry_lo, eb_lo, es_lo);
  r.bulk_exp = eb / (2.0 * kPi);
  r.bdry_exp = 2.0 * es / kPi;
  r.mean_term = 2.0 * sol.spec.divisor.chi() * sol.mean_c;
  r.I_value = r.dirichlet + r.bulk_exp + r.bdry_exp + r.mean_term;
  r.G_interaction = interaction_term(sol.spec.divisor);
  r.S_total = r.I_value + r.G_interaction;
  r.quadrature_error =
      std::abs(eb - eb_lo) / (2.0 * kPi) + 2.0 * std::abs(es - es_lo) / kPi;
  return r;
}

ActionReport regularized_action(const Solution& sol_reg) {
  if (!sol_reg.spec.reg)
    throw std::invalid_argument("regularized_action: solution has no mask");
  return classical_action(sol_reg);
}

namespace {

// one shifted re-solve on a morphed mesh, warm-started from the base field
std::pair<double, double> shifted_action(const Solution& base, int k, Complex new_loc,
                                         const SolverOptions& opt) {
  Mesh m = morph_mesh(base.disc->mesh, k, new_loc);
  ProblemSpec spec = base.spec;
  spec.divisor.punctures[k].location = new_loc;
  auto disc = Disc::build_from_mesh(std::move(m), spec.divisor, opt);
  Solution sol = solve_on_disc(disc, spec, opt, &base.varphi);
  ActionReport r = classical_action(sol);
  return {r.S_total, r.S_total};
}

}  // namespace

ActionDerivative action_derivative_fd(const Solution& base, int k, const SolverOptions& opt,
                                      double rel_step, int threads) {
  const Divisor& d = base.spec.divisor;
  if (k < 0 || k >= (int)d.size())
    throw std::invalid_argument("action_derivative_fd: bad puncture index");
  double mind = d.min_pair_distance();
  if (!std::isfinite(mind)) mind = 1.0;
  const auto& pk = d.punctures[k];
  if (pk.kind == PunctureKind::Bulk) mind = std::min(mind, pk.location.imag());
  double h = rel_step * mind;
  Complex z = pk.location;
  bool boundary = pk.kind == PunctureKind::Boundary;

  struct Task {
    Complex loc;
    double val = 0;
    double val_flat = 0;
  };
  std::vector<Task> tasks;
  auto add = [&](Complex loc) { tasks.push_back({loc, 0}); };
  for (double hh : {h, 0.5 * h}) {
    add(z + hh);
    add(z - hh);
    if (!boundary) {
      add(z + hh * kI);
      add(z - hh * kI);
    }
  }
  // shifted locations collide with another puncture -> error
  for (const auto& t : tasks)
    for (std::size_t j = 0; j < d.size(); ++j)
      if ((int)j != k && std::abs(d.punctures[j].location - t.loc) < 4 * h)
        throw std::runtime_error("action_derivative_fd: puncture collision under shift");

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      auto [v, vf] = shifted_action(base, k, tasks[i].loc, opt);
      tasks[i].val = v;
      tasks[i].val_flat = vf;
    }
  };
  std::vector<std::thread> pool;
  int nt = std::max(1, std::min<int>(threads, (int)tasks.size()));
  for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  auto wirtinger = [&](int base_idx, double hh, bool flat) {
    auto v = [&](int i) { return flat ? tasks[i].val_flat : tasks[i].val; };
    double dx = (v(base_idx) - v(base_idx + 1)) / (2 * hh);
    if (boundary) return Complex(dx, 0.0);
    double dy = (v(base_idx + 2) - v(base_idx + 3)) / (2 * hh);
    return Complex(0.5 * dx, -0.5 * dy);
  };
  int stride = boundary ? 2 : 4;
  Complex D1 = wirtinger(0, h, false);
  Complex D2 = wirtinger(stride, 0.5 * h, false);
  Complex rich = (4.0 * D2 - D1) / 3.0;
  ActionDerivative out;
  out.value_raw = rich;
  // insertion conformal factor in closed form: 4 delta_k w0(z_k) for bulk
  // insertions, 2 delta_l w0(s_l) on the boundary (half the metric factor)
  double delta_k = -pk.weight * (1.0 + 0.5 * pk.weight);
  Complex anchor = 4.0 * delta_k * dw0(z);
  out.value = rich - (boundary ? Complex(anchor.real(), 0.0) : anchor);
  out.error_estimate = std::abs(rich - D2);
  out.step_used = h;
  return out;
}

}  // namespace liouville
