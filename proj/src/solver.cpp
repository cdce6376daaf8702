#include "liouville/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "liouville/rng.hpp"

namespace liouville {

namespace {

double smoothstep01(double u) {
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

// Curvature masks in g0-geodesic distance (works in any stereographic chart).
double mask_bulk_value(const RegMask& r, const Divisor& d, Complex w_disk) {
  double m = 1.0;
  double band_e = r.band_fraction * r.eps, band_d = r.band_fraction * r.delta;
  for (const auto& p : d.punctures) {
    double dist = geodesic_distance(w_disk, cayley(p.location));
    m *= smoothstep01((dist - (r.eps - band_e)) / band_e);
    if (m == 0) return 0;
  }
  double db = std::abs(kPi / 2 - geodesic_distance(w_disk, Complex(0, 0)));
  m *= smoothstep01((db - (r.delta - band_d)) / band_d);
  return m;
}

double mask_bdry_value(const RegMask& r, const Divisor& d, Complex w_disk) {
  double m = 1.0;
  double band_e = r.band_fraction * r.eps;
  for (const auto& p : d.punctures) {
    double dist = geodesic_distance(w_disk, cayley(p.location));
    m *= smoothstep01((dist - (r.eps - band_e)) / band_e);
    if (m == 0) return 0;
  }
  return m;
}

}  // namespace

double ProblemSpec::sigma(int arc) const {
  if (sigma_arcs.empty()) return 0.0;
  return sigma_arcs[arc % (int)sigma_arcs.size()];
}

int ProblemSpec::num_arcs() const {
  int m = 0;
  for (const auto& p : divisor.punctures)
    if (p.kind == PunctureKind::Boundary) ++m;
  return std::max(1, m);
}

void ProblemSpec::validate_or_throw() const {
  auto bad = divisor.validate();
  if (!bad.empty()) throw std::invalid_argument("ProblemSpec: " + bad.front());
  if (!(Lambda > 0)) throw std::invalid_argument("ProblemSpec: Lambda must be > 0");
  for (double s : sigma_arcs)
    if (s < 0) throw std::invalid_argument("ProblemSpec: sigma must be >= 0");
  if ((int)sigma_arcs.size() != num_arcs())
    throw std::invalid_argument("ProblemSpec: need one sigma per boundary arc");
  if (reg) {
    if (!(reg->eps > 0) || !(reg->delta > 0))
      throw std::invalid_argument("ProblemSpec: regularization radii must be positive");
    double mind = divisor.min_pair_distance();
    if (std::isfinite(mind) && reg->eps >= mind / 3.0)
      throw std::invalid_argument("ProblemSpec: eps >= min pair distance / 3");
  }
}

ProblemSpec reference_spec() {
  ProblemSpec s;
  s.divisor.punctures = {{PunctureKind::Bulk, {0, 1}, -0.75},
                         {PunctureKind::Boundary, {0, 0}, -0.75},
                         {PunctureKind::Boundary, {1, 0}, -0.75}};
  s.Lambda = 2.0;
  s.sigma_arcs = {1.0, 1.0};
  return s;
}

std::shared_ptr<const Disc> Disc::build(const Divisor& d, const SolverOptions& opt) {
  return build_from_mesh(build_mesh(d, opt.target_h, opt.grading_depth, opt.mesh), d, opt);
}

std::shared_ptr<const Disc> Disc::build_from_mesh(Mesh mesh, const Divisor& d,
                                                  const SolverOptions& opt) {
  auto disc = std::make_shared<Disc>();
  disc->mesh = std::move(mesh);
  disc->divisor = d;
  disc->space = FeSpace::build(disc->mesh, opt.fe_order);
  disc->locator = std::make_unique<Locator>(disc->mesh);
  disc->eval = std::make_unique<FieldEval>(disc->space, *disc->locator);
  disc->ops = assemble(disc->space);
  disc->quad = std::make_unique<SingularQuadrature>(disc->space, *disc->locator,
                                                    disc->divisor, opt.quad);
  disc->m0 = disc->ops.bulk_mass * Vec::Ones(disc->space.n_dofs);
  disc->g0_area = disc->m0.sum();
  return disc;
}

std::shared_ptr<const ExpTables> build_tables(
    const Disc& disc, const ProblemSpec& spec,
    const std::function<double(Complex, Complex)>* bulk_density,
    const std::function<double(Complex, double, int)>* bdry_density) {
  auto t = std::make_shared<ExpTables>();
  auto fill = [&](const QuadratureSet& qs, std::vector<ExpTables::Pt>& bulk,
                  std::vector<ExpTables::Pt>& bdry) {
    bulk.reserve(qs.bulk.size());
    for (const auto& q : qs.bulk) {
      ExpTables::Pt p;
      p.elem = q.elem;
      p.shape = q.shape;
      p.x = q.x;
      p.t = 0;
      p.arc = -1;
      p.patch = q.patch;
      double dens;
      if (bulk_density) {
        dens = (*bulk_density)(q.w, q.x);
      } else {
        dens = spec.Lambda * q.EH;
        if (spec.reg) dens *= mask_bulk_value(*spec.reg, spec.divisor, q.w);
      }
      p.A = q.W0 * dens;
      if (p.A != 0.0) bulk.push_back(p);
    }
    bdry.reserve(qs.bdry.size());
    for (const auto& q : qs.bdry) {
      ExpTables::Pt p;
      p.elem = q.elem;
      p.shape = q.shape;
      p.x = Complex(q.t, 0);
      p.t = q.t_inf ? std::numeric_limits<double>::infinity() : q.t;
      p.arc = q.arc;
      p.patch = q.patch;
      double dens;
      if (bdry_density) {
        dens = (*bdry_density)(q.w, q.t, q.arc);
      } else {
        dens = spec.sigma(q.arc) * q.EH2;
        if (spec.reg) dens *= mask_bdry_value(*spec.reg, spec.divisor, q.w);
      }
      p.A = q.W0 * dens;
      if (p.A != 0.0) bdry.push_back(p);
    }
    auto by_elem = [](const ExpTables::Pt& a, const ExpTables::Pt& b) {
      return a.elem < b.elem;
    };
    std::stable_sort(bulk.begin(), bulk.end(), by_elem);
    std::stable_sort(bdry.begin(), bdry.end(), by_elem);
  };
  fill(disc.quad->hi(), t->bulk, t->bdry);
  fill(disc.quad->lo(), t->bulk_lo, t->bdry_lo);
  return t;
}

namespace {

double point_value(const FeSpace& s, const ExpTables::Pt& p, const Vec& u) {
  const auto& ed = s.elem_dofs[p.elem];
  double v = 0;
  for (int i = 0; i < s.dofs_per_elem; ++i) v += p.shape[i] * u[ed[i]];
  return v;
}

}  // namespace

double EnergyModel::energy(const Vec& u, bool* overflow) const {
  const FeSpace& s = disc->space;
  double quad = 0.25 / kPi * u.dot(disc->ops.stiffness * u);
  double eb = 0, es = 0;
  bool of = false;
  for (const auto& p : tables->bulk) {
    double v = point_value(s, p, u);
    if (v > 350) of = true;
    eb += p.A * std::exp(std::min(v, 700.0));
  }
  for (const auto& p : tables->bdry) {
    double v = 0.5 * point_value(s, p, u);
    if (v > 350) of = true;
    es += p.A * std::exp(std::min(v, 700.0));
  }
  if (overflow) *overflow = of;
  double mean_term = 2.0 * chi * disc->m0.dot(u) / disc->g0_area;
  return quad + eb / (2.0 * kPi) + 2.0 * es / kPi + mean_term;
}

Vec EnergyModel::gradient(const Vec& u) const {
  const FeSpace& s = disc->space;
  Vec g = 0.5 / kPi * (disc->ops.stiffness * u);
  for (const auto& p : tables->bulk) {
    double e = p.A * std::exp(std::min(point_value(s, p, u), 700.0)) / (2.0 * kPi);
    const auto& ed = s.elem_dofs[p.elem];
    for (int i = 0; i < s.dofs_per_elem; ++i) g[ed[i]] += e * p.shape[i];
  }
  for (const auto& p : tables->bdry) {
    double e = p.A * std::exp(std::min(0.5 * point_value(s, p, u), 700.0)) / kPi;
    const auto& ed = s.elem_dofs[p.elem];
    for (int i = 0; i < s.dofs_per_elem; ++i) g[ed[i]] += e * p.shape[i];
  }
  g += (2.0 * chi / disc->g0_area) * disc->m0;
  return g;
}

SpMat EnergyModel::hessian(const Vec& u) const {
  const FeSpace& s = disc->space;
  const int nd = s.dofs_per_elem;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(tables->bulk.size() / 2);
  Eigen::MatrixXd loc(nd, nd);
  auto flush = [&](int elem, const Eigen::MatrixXd& m) {
    const auto& ed = s.elem_dofs[elem];
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j)
        if (m(i, j) != 0) trip.emplace_back(ed[i], ed[j], m(i, j));
  };
  auto accumulate = [&](const std::vector<ExpTables::Pt>& pts, bool boundary) {
    int cur = -1;
    loc.setZero();
    for (const auto& p : pts) {
      if (p.elem != cur) {
        if (cur >= 0) flush(cur, loc);
        cur = p.elem;
        loc.setZero();
      }
      double w;
      if (boundary)
        w = 0.5 * p.A * std::exp(std::min(0.5 * point_value(s, p, u), 700.0)) / (2.0 * kPi);
      else
        w = p.A * std::exp(std::min(point_value(s, p, u), 700.0)) / (2.0 * kPi);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j <= i; ++j) {
          double v = w * p.shape[i] * p.shape[j];
          loc(i, j) += v;
          if (j != i) loc(j, i) += v;
        }
    }
    if (cur >= 0) flush(cur, loc);
  };
  accumulate(tables->bulk, false);
  accumulate(tables->bdry, true);
  SpMat H(s.n_dofs, s.n_dofs);
  H.setFromTriplets(trip.begin(), trip.end());
  H += SpMat(0.5 / kPi * disc->ops.stiffness);
  return H;
}

namespace {

Solution newton_minimize(std::shared_ptr<const Disc> disc, const ProblemSpec& spec,
                         std::shared_ptr<const ExpTables> tables, const SolverOptions& opt,
                         const Vec* warm_start) {
  EnergyModel em{disc, spec, tables, spec.divisor.chi()};
  const int n = disc->space.n_dofs;
  Vec u;
  if (warm_start && warm_start->size() == n) {
    u = *warm_start;
  } else {
    // 1D reduction in the constant mode puts the exponentials on scale
    double SA = 0, SB = 0;
    for (const auto& p : tables->bulk) SA += p.A;
    for (const auto& p : tables->bdry) SB += p.A;
    double c = 0;
    for (int it = 0; it < 80; ++it) {
      double f1 = SA * std::exp(c) / (2 * kPi) + SB * std::exp(0.5 * c) / kPi + 2 * em.chi;
      double f2 = SA * std::exp(c) / (2 * kPi) + 0.5 * SB * std::exp(0.5 * c) / kPi;
      double step = std::clamp(f1 / f2, -4.0, 4.0);
      c -= step;
      if (std::abs(step) < 1e-14) break;
    }
    u = Vec::Constant(n, c);
  }

  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;
  bool fallback = false;
  double gnorm = 0;
  int iter = 0;
  bool overflow = false;
  double e0 = em.energy(u, &overflow);
  for (; iter < opt.max_iter; ++iter) {
    Vec g = em.gradient(u);
    gnorm = g.norm();
    if (gnorm <= opt.tol) break;
    SpMat H = em.hessian(u);
    Vec dir;
    if (opt.use_direct_solver) {
      if (!analyzed) {
        ldlt.analyzePattern(H);
        analyzed = true;
      }
      ldlt.factorize(H);
      if (ldlt.info() != Eigen::Success) throw std::runtime_error("solve: LDLT failed");
      dir = ldlt.solve(-g);
    } else {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                               Eigen::DiagonalPreconditioner<double>>
          cg;
      cg.setTolerance(1e-10);
      cg.setMaxIterations(40000);
      cg.compute(H);
      dir = cg.solve(-g);
      if (cg.info() != Eigen::Success) {
        fallback = true;
        if (!analyzed) {
          ldlt.analyzePattern(H);
          analyzed = true;
        }
        ldlt.factorize(H);
        if (ldlt.info() != Eigen::Success) throw std::runtime_error("solve: LDLT failed");
        dir = ldlt.solve(-g);
      }
    }
    double gd = g.dot(dir);
    double t = 1.0;
    double enew = 0;
    if (gnorm < 1e-5 * (1.0 + std::abs(e0))) {
      // quadratic basin: energy differences are below double resolution,
      // the plain Newton step converges
      enew = em.energy(u + dir, &overflow);
    } else {
      for (int ls = 0; ls < 50; ++ls) {
        enew = em.energy(u + t * dir, &overflow);
        if (enew <= e0 + 1e-4 * t * gd || t < 1e-10) break;
        t *= 0.5;
      }
    }
    u += t * dir;
    e0 = enew;
  }
  if (gnorm > opt.tol) {
    gnorm = em.gradient(u).norm();
    if (gnorm > opt.tol)
      throw std::runtime_error("solve: Newton did not converge, |g| = " +
                               std::to_string(gnorm) + " after " + std::to_string(iter) +
                               " iterations");
  }

  Solution sol;
  sol.disc = disc;
  sol.spec = spec;
  sol.tables = tables;
  sol.varphi = u;
  sol.mean_c = disc->m0.dot(u) / disc->g0_area;
  sol.newton_iterations = iter;
  sol.gradient_norm = gnorm;
  sol.energy_value = em.energy(u, &sol.overflow_flag);
  sol.used_fallback_solver = fallback;
  // solved masses and the nested-rule quadrature error
  auto masses = [&](const std::vector<ExpTables::Pt>& b, const std::vector<ExpTables::Pt>& s,
                    double& mb, double& ms) {
    mb = ms = 0;
    for (const auto& p : b) mb += p.A * std::exp(point_value(disc->space, p, u));
    for (const auto& p : s) ms += p.A * std::exp(0.5 * point_value(disc->space, p, u));
  };
  double mb_hi, ms_hi, mb_lo, ms_lo;
  masses(tables->bulk, tables->bdry, mb_hi, ms_hi);
  masses(tables->bulk_lo, tables->bdry_lo, mb_lo, ms_lo);
  sol.bulk_mass = mb_hi;
  sol.bdry_mass = ms_hi;
  sol.quadrature_error = std::abs(mb_hi - mb_lo) / (4 * kPi) + std::abs(ms_hi - ms_lo) / (2 * kPi);
  return sol;
}

}  // namespace

Solution solve_on_disc(std::shared_ptr<const Disc> disc, const ProblemSpec& spec,
                       const SolverOptions& opt, const Vec* warm_start) {
  spec.validate_or_throw();
  auto tables = build_tables(*disc, spec);
  return newton_minimize(disc, spec, tables, opt, warm_start);
}

Solution solve(const ProblemSpec& spec, const SolverOptions& opt) {
  spec.validate_or_throw();
  auto disc = Disc::build(spec.divisor, opt);
  return solve_on_disc(disc, spec, opt);
}

double Solution::varphi_at(Complex w) const { return disc->eval->value(varphi, w); }

Eigen::Vector2d Solution::grad_varphi_at(Complex w) const {
  return disc->eval->gradient(varphi, w);
}

double Solution::Phi(Complex x) const {
  return varphi_at(cayley(x)) + h_field(spec.divisor, x) + 2.0 * conformal_exponent(x);
}

double Solution::Phi_sub(Complex x, int k) const {
  return varphi_at(cayley(x)) + h_smooth(spec.divisor, k, x) + 2.0 * conformal_exponent(x);
}

Complex Solution::dPhi_sub(Complex x, int k) const {
  Eigen::Vector2d g = grad_varphi_at(cayley(x));
  Complex dw(0.5 * g[0], -0.5 * g[1]);  // Wirtinger in disk coords
  Complex dx = dw * cayley_dwdx(x);
  return dx + dh_smooth(spec.divisor, k, x) + 2.0 * dw0(x);
}

double Solution::gauss_bonnet_defect() const {
  return std::abs(bulk_mass / (4 * kPi) + bdry_mass / (2 * kPi) + spec.divisor.chi());
}

ResidualReport residual_check(const Solution& sol) {
  // weak residuals of the interior equation and the Robin boundary condition,
  // measured in the discrete dual (coefficient l2) norm: the energy gradient
  // restricted to interior and boundary degrees of freedom
  EnergyModel em{sol.disc, sol.spec, sol.tables, sol.spec.divisor.chi()};
  Vec g = em.gradient(sol.varphi);
  const auto& s = sol.disc->space;
  double ri = 0, rb = 0;
  for (int i = 0; i < s.n_dofs; ++i) {
    double v = g[i] * g[i];
    if (s.dof_on_boundary[i])
      rb += v;
    else
      ri += v;
  }
  return {std::sqrt(ri), std::sqrt(rb)};
}

double consistency_identity(const Solution& sol, int n_probes, std::uint64_t seed) {
  const auto& disc = *sol.disc;
  const auto& spec = sol.spec;
  Rng rng(seed, 900);
  double worst = 0;
  int accepted = 0;
  int guard = 0;
  while (accepted < n_probes && ++guard < 200 * n_probes) {
    Complex w(rng.uniform(-0.85, 0.85), rng.uniform(-0.85, 0.85));
    if (std::abs(w) > 0.85) continue;
    Complex x = cayley_inv(w);
    // keep clear of the puncture patches
    double sep = 1e9;
    for (const auto& pi : disc.quad->patches())
      sep = std::min(sep,
                     (std::abs(x - pi.z_half) - pi.R) * std::abs(cayley_dwdx(pi.z_half)));
    double probeR = std::min(0.1, 0.4 * sep);
    if (probeR < 0.02) continue;

    SingularQuadrature::ProbeQuad pq;
    try {
      pq = disc.quad->make_probe_quad(x, probeR, 10, 24, 2);
    } catch (const std::invalid_argument&) {
      continue;  // band would reach a puncture patch; pick another probe
    }
    ++accepted;
    double c = sol.mean_c;
    double bulk_int = 0, bdry_int = 0;
    for (const auto& p : sol.tables->bulk) {
      if (p.patch < 0 && pq.replaced_elem[p.elem]) continue;
      double e = p.A * std::exp(point_value(disc.space, p, sol.varphi));
      bulk_int += e * green_mean_zero(x, p.x);
    }
    auto add_points = [&](const std::vector<BulkQP>& pts) {
      for (const auto& q : pts) {
        double dens = spec.Lambda * q.EH;
        if (spec.reg) dens *= mask_bulk_value(*spec.reg, spec.divisor, q.w);
        double uu = 0;
        const auto& ed = disc.space.elem_dofs[q.elem];
        for (int i = 0; i < disc.space.dofs_per_elem; ++i) uu += q.shape[i] * sol.varphi[ed[i]];
        if (q.x != x) bulk_int += q.W0 * dens * std::exp(uu) * green_mean_zero(x, q.x);
      }
    };
    add_points(pq.band);
    add_points(pq.patch);
    for (const auto& p : sol.tables->bdry) {
      double e = p.A * std::exp(0.5 * point_value(disc.space, p, sol.varphi));
      double gval = std::isinf(p.t) ? green_mean_zero_at_infinity(x)
                                    : green_mean_zero(x, Complex(p.t, 0));
      bdry_int += e * gval;
    }
    double rhs = c - bulk_int / (2 * kPi) - bdry_int / kPi;
    double dev = std::abs(sol.varphi_at(w) - rhs);
    worst = std::max(worst, dev);
  }
  if (accepted == 0) throw std::runtime_error("consistency_identity: no valid probes");
  return worst;
}

Manufactured manufactured_oracle(const Divisor& d, std::uint64_t seed) {
  double chi = d.chi();
  if (chi >= 0) throw std::invalid_argument("manufactured_oracle: chi >= 0");
  Rng rng(seed, 77);
  for (int attempt = 0; attempt < 200; ++attempt) {
    double alpha = rng.uniform(0.05, 0.3);
    double amp = rng.uniform(0.05, 0.4);
    double s2 = std::pow(rng.uniform(0.25, 0.5), 2);
    Complex w0(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4));

    auto phi_hat = [=](Complex w) {
      double r2 = std::norm(w);
      double d2 = std::norm(w - w0);
      return alpha * (1 - r2) * (1 - r2) + amp * std::exp(-d2 / s2);
    };
    auto lap_flat = [=](Complex w) {
      double r2 = std::norm(w);
      double d2 = std::norm(w - w0);
      return alpha * (16 * r2 - 8) + amp * std::exp(-d2 / s2) * (4 * d2 / (s2 * s2) - 4 / s2);
    };
    auto bulk_density = [=](Complex w, Complex) {
      double lap_g0 = lap_flat(w) / disk_metric_factor(w);
      return (lap_g0 - 2 * chi) * std::exp(-phi_hat(w));
    };
    auto bdry_density = [=](Complex w, int) {
      // -1/2 d_n phi_hat e^{-phi_hat/2}; the radial base term has zero slope at 1
      double d2 = std::norm(w - w0);
      double dot = w.real() * (w.real() - w0.real()) + w.imag() * (w.imag() - w0.imag());
      double dn = amp * std::exp(-d2 / s2) * (-2.0 * dot / s2);
      return -0.5 * dn * std::exp(-0.5 * phi_hat(w));
    };

    // positivity of the induced curvature on a sample grid
    bool ok = true;
    for (int i = 0; i < 400 && ok; ++i) {
      Complex w(rng.uniform(-1, 1), rng.uniform(-1, 1));
      if (std::abs(w) > 0.999) continue;
      if (bulk_density(w, Complex(0, 0)) <= 1e-6) ok = false;
    }
    for (int i = 0; i < 200 && ok; ++i) {
      double th = rng.uniform(0, 2 * kPi);
      if (bdry_density(Complex(std::cos(th), std::sin(th)), 0) < -1e-12) ok = false;
    }
    if (!ok) continue;
    Manufactured mf;
    mf.phi_hat = phi_hat;
    mf.bulk_density = [bulk_density](Complex w) { return bulk_density(w, Complex(0, 0)); };
    mf.bdry_density = [bdry_density](Complex w, int a) { return bdry_density(w, a); };
    mf.description = "radial quartic + interior gaussian bump";
    return mf;
  }
  throw std::runtime_error("manufactured_oracle: rejection cap exceeded");
}

Solution solve_manufactured(const Manufactured& mf, const Divisor& d,
                            const SolverOptions& opt) {
  ProblemSpec spec;
  spec.divisor = d;
  spec.Lambda = 1.0;  // placeholder; densities are supplied directly
  spec.sigma_arcs.assign(spec.num_arcs(), 0.0);
  auto disc = Disc::build(d, opt);
  std::function<double(Complex, Complex)> bd = [&mf](Complex w, Complex) {
    return mf.bulk_density(w);
  };
  std::function<double(Complex, double, int)> sd = [&mf](Complex w, double, int arc) {
    return mf.bdry_density(w, arc);
  };
  auto tables = build_tables(*disc, spec, &bd, &sd);
  return newton_minimize(disc, spec, tables, opt, nullptr);
}

ProblemSpec transform_spec(const ProblemSpec& spec, double theta) {
  ProblemSpec out = spec;
  for (auto& p : out.divisor.punctures) {
    p.location = half_plane_isometry(theta, p.location);
    if (p.kind == PunctureKind::Boundary) p.location = Complex(p.location.real(), 0.0);
  }
  // relabel arcs: arc j of the new sorted order inherits the sigma of the old
  // arc starting at the preimage of its left endpoint
  auto old_sorted = spec.divisor.boundary_sorted();
  auto new_sorted = out.divisor.boundary_sorted();
  const int M = (int)old_sorted.size();
  if (M > 0) {
    std::vector<double> ns(M);
    for (int j = 0; j < M; ++j) {
      // preimage of the new left endpoint
      Complex pre = half_plane_isometry(-theta, new_sorted[j]->location);
      int idx = 0;
      double best = 1e18;
      for (int l = 0; l < M; ++l) {
        double dd = std::abs(old_sorted[l]->location - pre);
        if (dd < best) {
          best = dd;
          idx = l;
        }
      }
      ns[j] = spec.sigma_arcs[idx];
    }
    out.sigma_arcs = ns;
  }
  return out;
}

double weighted_pairing(const Solution& sol, const std::function<double(Complex)>& f_bulk,
                        const std::function<double(double, bool)>& f_bdry) {
  const auto& s = sol.disc->space;
  double acc = 0;
  for (const auto& p : sol.tables->bulk)
    acc += p.A * std::exp(point_value(s, p, sol.varphi)) * f_bulk(p.x);
  for (const auto& p : sol.tables->bdry)
    acc += p.A * std::exp(0.5 * point_value(s, p, sol.varphi)) * f_bdry(p.t, std::isinf(p.t));
  return acc / (4.0 * kPi);
}

SingularPart singular_part(const Disc& disc, const Divisor& d) {
  SingularPart sp;
  sp.divisor = &d;
  const auto& s = disc.space;
  sp.nodal = Vec::Zero(s.n_dofs);
  for (int i = 0; i < s.n_dofs; ++i) {
    Complex w = s.dof_point[i];
    bool at_puncture = false;
    int which = -1;
    for (std::size_t k = 0; k < d.size(); ++k)
      if (std::abs(w - cayley(d.punctures[k].location)) < 1e-13) {
        at_puncture = true;
        which = (int)k;
      }
    Complex x = std::abs(w - Complex(1, 0)) < 1e-13 ? Complex(0, 0) : cayley_inv(w);
    if (at_puncture)
      sp.nodal[i] = h_smooth(d, which, x);  // decomposition, not a value
    else if (std::abs(w - Complex(1, 0)) < 1e-13)
      sp.nodal[i] = h_field_at_infinity(d);
    else
      sp.nodal[i] = h_field(d, x);
  }
  return sp;
}

double SingularPart::log_coefficient(int k) const {
  return divisor->punctures[k].log_coefficient();
}

double SingularPart::smooth_at(int k, Complex x) const { return h_smooth(*divisor, k, x); }

}  // namespace liouville
