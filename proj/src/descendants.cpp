#include "liouville/descendants.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "liouville/rng.hpp"

namespace liouville {

namespace {

double point_value(const FeSpace& s, const ExpTables::Pt& p, const Vec& u) {
  const auto& ed = s.elem_dofs[p.elem];
  double v = 0;
  for (int i = 0; i < s.dofs_per_elem; ++i) v += p.shape[i] * u[ed[i]];
  return v;
}

double qp_value(const FeSpace& s, const BulkQP& q, const Vec& u) {
  const auto& ed = s.elem_dofs[q.elem];
  double v = 0;
  for (int i = 0; i < s.dofs_per_elem; ++i) v += q.shape[i] * u[ed[i]];
  return v;
}

int entry_index_of_source(const std::vector<DescendantEntry>& entries, int source,
                          bool conjugate) {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].source == source && entries[i].conjugate == conjugate) return (int)i;
  return -1;
}

}  // namespace

IntegralEngine::IntegralEngine(const Solution& sol) : sol_(&sol) {
  const auto& s = sol.disc->space;
  auto fill = [&](const std::vector<ExpTables::Pt>& pts, bool half, std::vector<double>& out) {
    out.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      out[i] = std::exp((half ? 0.5 : 1.0) * point_value(s, pts[i], sol.varphi));
  };
  fill(sol.tables->bulk, false, expu_bulk_);
  fill(sol.tables->bdry, true, expu_bdry_);
  fill(sol.tables->bulk_lo, false, expu_bulk_lo_);
  fill(sol.tables->bdry_lo, true, expu_bdry_lo_);
  gb_ = 2.0 * sol.spec.divisor.chi() + sol.bulk_mass / (2 * kPi) + sol.bdry_mass / kPi;
}

Complex IntegralEngine::itot(const Kernel& f, bool lo) const {
  const auto& tb = lo ? sol_->tables->bulk_lo : sol_->tables->bulk;
  const auto& ts = lo ? sol_->tables->bdry_lo : sol_->tables->bdry;
  const auto& eb = lo ? expu_bulk_lo_ : expu_bulk_;
  const auto& es = lo ? expu_bdry_lo_ : expu_bdry_;
  Complex acc{0, 0};
  for (std::size_t i = 0; i < tb.size(); ++i) {
    const auto& p = tb[i];
    acc += p.A * eb[i] * (f(p.x) + f(std::conj(p.x)));
  }
  acc /= 4.0 * kPi;
  Complex accb{0, 0};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& p = ts[i];
    if (std::isinf(p.t)) continue;  // decaying kernels
    accb += p.A * es[i] * f(Complex(p.t, 0.0));
  }
  return acc + accb / kPi;
}

Complex IntegralEngine::itot_excluding_ball(const Kernel& f, int skip, double r,
                                            bool lo) const {
  const auto& patches = sol_->disc->quad->patches();
  const PatchInfo& pi = patches[skip];
  if (!pi.boundary)
    throw std::invalid_argument("itot_excluding_ball: only boundary punctures");
  if (r > 0.5 * pi.R) throw std::invalid_argument("itot_excluding_ball: r too large");
  Complex s(pi.z_real, 0.0);

  // table part without the excluded patch
  const auto& tb = lo ? sol_->tables->bulk_lo : sol_->tables->bulk;
  const auto& ts = lo ? sol_->tables->bdry_lo : sol_->tables->bdry;
  const auto& ebu = lo ? expu_bulk_lo_ : expu_bulk_;
  const auto& ebd = lo ? expu_bdry_lo_ : expu_bdry_;
  const int n_rad = lo ? 10 : 16;
  Complex acc{0, 0};
  for (std::size_t i = 0; i < tb.size(); ++i) {
    const auto& p = tb[i];
    if (p.patch == skip) continue;
    acc += p.A * ebu[i] * (f(p.x) + f(std::conj(p.x)));
  }
  acc /= 4.0 * kPi;
  Complex accb{0, 0};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& p = ts[i];
    if (p.patch == skip || std::isinf(p.t)) continue;
    accb += p.A * ebd[i] * f(Complex(p.t, 0.0));
  }
  acc += accb / kPi;

  const ProblemSpec& spec = sol_->spec;
  // annulus [r, R] around s with the patch cutoff restored
  GaussRule gth = gauss_legendre(lo ? 16 : 24);
  auto bulk_ring = [&](double r0, double r1, bool with_chi, int n_rad2) {
    GaussRule gr = gauss_legendre(n_rad2);
    Complex out{0, 0};
    for (std::size_t i = 0; i < gr.x.size(); ++i) {
      double rho = r0 + (r1 - r0) * gr.x[i];
      double chi = with_chi ? patch_cutoff(rho / pi.R) : 1.0;
      if (chi == 0) continue;
      for (std::size_t j = 0; j < gth.x.size(); ++j) {
        double th = kPi * gth.x[j];
        Complex x = s + rho * Complex(std::cos(th), std::sin(th));
        double ephi = std::exp(sol_->Phi(x));
        Complex val = f(x) + f(std::conj(x));
        out += gr.w[i] * (r1 - r0) * rho * kPi * gth.w[j] * chi * spec.Lambda * ephi * val;
      }
    }
    return out / (4.0 * kPi);
  };
  // geometric panels from r to R/2, then the cutoff band
  double hi = 0.5 * pi.R;
  std::vector<std::pair<double, double>> panels;
  while (hi > 2.0 * r) {
    panels.push_back({hi * 0.5, hi});
    hi *= 0.5;
  }
  panels.push_back({r, hi});
  for (auto [a, b] : panels) acc += bulk_ring(a, b, false, n_rad);
  acc += bulk_ring(0.5 * pi.R, pi.R, true, n_rad);

  // line annulus on both sides
  auto bps = sol_->spec.divisor.boundary_sorted();
  const int M = (int)bps.size();
  int sorted_index = 0;
  for (int l = 0; l < M; ++l)
    if (std::abs(bps[l]->location.real() - pi.z_real) < 1e-14) sorted_index = l;
  GaussRule gl1 = gauss_legendre(n_rad);
  auto line_ring = [&](double r0, double r1, bool with_chi, int side) {
    int arc = side == 1 ? sorted_index : (sorted_index - 1 + M) % M;
    double sg = spec.sigma(arc);
    Complex out{0, 0};
    if (sg == 0) return out;
    for (std::size_t i = 0; i < gl1.x.size(); ++i) {
      double rho = r0 + (r1 - r0) * gl1.x[i];
      double chi = with_chi ? patch_cutoff(rho / pi.R) : 1.0;
      if (chi == 0) continue;
      double t = pi.z_real + (side == 1 ? rho : -rho);
      double eph = std::exp(0.5 * sol_->Phi(Complex(t, 0)));
      out += gl1.w[i] * (r1 - r0) * chi * sg * eph * f(Complex(t, 0));
    }
    return out;
  };
  for (int side : {0, 1}) {
    for (auto [a, b] : panels) acc += line_ring(a, b, false, side) / kPi;
    acc += line_ring(0.5 * pi.R, pi.R, true, side) / kPi;
  }
  return acc;
}

IntegralEngine::Probe IntegralEngine::make_probe(Complex z_half, double R_disk) const {
  Probe p;
  p.z = z_half;
  p.pq = sol_->disc->quad->make_probe_quad(z_half, R_disk, 10, 32, 2);
  const auto& s = sol_->disc->space;
  auto dens = [&](const BulkQP& q) {
    double d = sol_->spec.Lambda * q.EH * std::exp(qp_value(s, q, sol_->varphi));
    return d;
  };
  // masked problems: nothing extra needed; probes are used on plain solves
  for (const auto& q : p.pq.band) p.dens_band.push_back(dens(q));
  for (const auto& q : p.pq.patch) p.dens_patch.push_back(dens(q));
  return p;
}

Complex IntegralEngine::itot_probe(const Probe& p, const Kernel& f, bool lo) const {
  const auto& tb = lo ? sol_->tables->bulk_lo : sol_->tables->bulk;
  const auto& ts = lo ? sol_->tables->bdry_lo : sol_->tables->bdry;
  const auto& eb = lo ? expu_bulk_lo_ : expu_bulk_;
  const auto& es = lo ? expu_bdry_lo_ : expu_bdry_;
  Complex acc{0, 0};
  for (std::size_t i = 0; i < tb.size(); ++i) {
    const auto& q = tb[i];
    if (q.patch < 0 && p.pq.replaced_elem[q.elem]) continue;
    acc += q.A * eb[i] * (f(q.x) + f(std::conj(q.x)));
  }
  for (std::size_t i = 0; i < p.pq.band.size(); ++i) {
    const auto& q = p.pq.band[i];
    acc += q.W0 * p.dens_band[i] * (f(q.x) + f(std::conj(q.x)));
  }
  for (std::size_t i = 0; i < p.pq.patch.size(); ++i) {
    const auto& q = p.pq.patch[i];
    if (q.x == p.z) continue;
    acc += q.W0 * p.dens_patch[i] * (f(q.x) + f(std::conj(q.x)));
  }
  acc /= 4.0 * kPi;
  Complex accb{0, 0};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& q = ts[i];
    if (std::isinf(q.t)) continue;
    accb += q.A * es[i] * f(Complex(q.t, 0.0));
  }
  return acc + accb / kPi;
}

Complex l1_bulk(const IntegralEngine& eng, int k, double* err) {
  const Solution& sol = eng.solution();
  auto entries = doubled_list(sol.spec.divisor);
  const auto& ek = entries[k];
  if (ek.boundary) throw std::invalid_argument("l1_bulk: boundary entry");
  Complex sum{0, 0};
  for (std::size_t l = 0; l < entries.size(); ++l) {
    if ((int)l == k) continue;
    sum += 2.0 * ek.c * entries[l].c / (entries[l].x - ek.x);
  }
  auto f = [&](Complex y) { return 2.0 * ek.c / (y - ek.x); };
  Complex hi = eng.itot(f, false);
  if (err) *err = std::abs(hi - eng.itot(f, true));
  return sum + hi;
}

Complex l1_bulk_direct(const Solution& sol, int k, double* err) {
  const Divisor& d = sol.spec.divisor;
  const auto& p = d.punctures[k];
  if (p.kind != PunctureKind::Bulk)
    throw std::invalid_argument("l1_bulk_direct: boundary puncture");
  double R = sol.disc->quad->patches()[k].R * std::abs(cayley_dwdx(p.location));
  auto ring_avg = [&](double rho) {
    // angular average of the FE Wirtinger gradient around the puncture image
    Complex pc = cayley(p.location);
    const int n = 48;
    Complex acc{0, 0};
    for (int j = 0; j < n; ++j) {
      double th = 2 * kPi * (j + 0.5) / n;
      Complex w = pc + rho * Complex(std::cos(th), std::sin(th));
      Eigen::Vector2d g = sol.disc->eval->gradient(sol.varphi, w);
      Complex dw(0.5 * g[0], -0.5 * g[1]);
      acc += dw * cayley_dwdx(cayley_inv(w));
    }
    return acc / double(n);
  };
  double rho1 = 0.12 * R, rho2 = 0.06 * R;
  Complex d1 = ring_avg(rho1), d2 = ring_avg(rho2);
  Complex dphi = d2 + dh_smooth(d, k, p.location) + 2.0 * dw0(p.location);
  if (err) *err = std::abs(d1 - d2);
  return -2.0 * p.weight * dphi;
}

double l1_boundary(const IntegralEngine& eng, int l, double r, const SolverOptions& opt,
                   double* err) {
  const Solution& sol = eng.solution();
  const Divisor& d = sol.spec.divisor;
  auto entries = doubled_list(d);
  const auto& el = entries[l];
  if (!el.boundary) throw std::invalid_argument("l1_boundary: bulk entry");
  int src = el.source;
  double b = d.punctures[src].weight;
  double t0 = el.x.real();
  double mind = 1e18;
  for (std::size_t j = 0; j < d.size(); ++j)
    if ((int)j != src) mind = std::min(mind, std::abs(d.punctures[j].location - el.x));
  if (r > mind / 3.0 + 1e-15) throw std::invalid_argument("l1_boundary: r too large");

  auto bps = d.boundary_sorted();
  const int M = (int)bps.size();
  int sorted_index = 0;
  for (int m = 0; m < M; ++m)
    if (std::abs(bps[m]->location.real() - t0) < 1e-14) sorted_index = m;
  double sig_plus = sol.spec.sigma(sorted_index);
  double sig_minus = sol.spec.sigma((sorted_index - 1 + M) % M);

  const Vec* warm = &sol.varphi;
  Vec last;
  std::vector<double> es{r, 0.7 * r, 0.5 * r}, vals;
  for (double eps : es) {
    ProblemSpec rs = sol.spec;
    rs.reg = RegMask{eps, eps, 0.2};
    Solution ms = solve_on_disc(sol.disc, rs, opt, warm);
    last = ms.varphi;
    warm = &last;
    double ss = 0.2 * eps;
    auto tr = [&](double t) { return ms.Phi_sub(Complex(t, 0), src); };
    double d1 = (tr(t0 - 2 * ss) - 8 * tr(t0 - ss) + 8 * tr(t0 + ss) - tr(t0 + 2 * ss)) /
                (12 * ss);
    double brk = sig_plus * std::exp(0.5 * ms.Phi(Complex(t0 + eps, 0))) -
                 sig_minus * std::exp(0.5 * ms.Phi(Complex(t0 - eps, 0)));
    vals.push_back(-b * d1 - 2.0 / kPi * brk);
  }
  double p = std::min(2.0 * (1.0 + b), 2.0);  // corner-harmonic rate
  double q1 = std::pow(es[1] / es[0], p), q2 = std::pow(es[2] / es[1], p);
  double a1 = (vals[1] - q1 * vals[0]) / (1.0 - q1);
  double a2 = (vals[2] - q2 * vals[1]) / (1.0 - q2);
  if (err) *err = std::abs(a2 - a1) + 0.3 * std::abs(vals[2] - vals[1]);
  return a2;
}

DescendantReport accessory_parameters(const IntegralEngine& eng) {
  const Solution& sol = eng.solution();
  const Divisor& d = sol.spec.divisor;
  auto entries = doubled_list(d);
  DescendantReport rep;
  rep.entries.reserve(entries.size());
  for (const auto& e : entries) {
    DescendantEntry de;
    de.x = e.x;
    de.c = e.c;
    de.source = e.source;
    de.conjugate = e.conjugate;
    de.boundary = e.boundary;
    de.delta = -e.c * (1.0 + 0.5 * e.c);
    rep.entries.push_back(de);
  }
  // bulk entries through the doubled-list formula
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    auto& de = rep.entries[i];
    if (de.boundary || de.conjugate) continue;
    double err = 0;
    de.l1 = l1_bulk(eng, (int)i, &err);
    de.l1_error = err;
    de.accessory = 0.5 * de.l1;
    rep.quadrature_error = std::max(rep.quadrature_error, err);
  }
  for (auto& de : rep.entries) {
    if (!de.conjugate) continue;
    int partner = entry_index_of_source(rep.entries, de.source, false);
    de.l1 = std::conj(rep.entries[partner].l1);
    de.accessory = 0.5 * de.l1;
    de.l1_error = rep.entries[partner].l1_error;
  }
  // boundary residues from the direct stress tensor: the double-pole weights
  // are known, so the simple poles are a linear least-squares fit at probes
  std::vector<int> bidx;
  for (std::size_t i = 0; i < rep.entries.size(); ++i)
    if (rep.entries[i].boundary) bidx.push_back((int)i);
  if (!bidx.empty()) {
    Rng rng(20240 + (std::uint64_t)bidx.size());
    std::vector<Complex> zs;
    std::vector<Complex> rhs;
    double probe_err = 0;
    int guard = 0;
    while ((int)zs.size() < std::max(16, 8 * (int)bidx.size()) && ++guard < 4000) {
      Complex z(rng.uniform(-3.2, 3.2), rng.uniform(0.35, 2.6));
      bool ok = true;
      for (const auto& e : rep.entries) ok &= std::abs(z - e.x) > 0.5;
      if (!ok) continue;
      Complex td;
      double perr = 0;
      try {
        td = stress_tensor_direct(eng, z, &perr);
      } catch (const std::exception&) {
        continue;
      }
      // subtract everything already known
      Complex known{0, 0};
      for (const auto& e : rep.entries) {
        Complex dd = z - e.x;
        known += e.delta / (dd * dd);
        if (!e.boundary) known += e.accessory / dd;
      }
      zs.push_back(z);
      rhs.push_back(td - known);
      probe_err = std::max(probe_err, perr);
    }
    if ((int)zs.size() < (int)bidx.size())
      throw std::runtime_error("accessory_parameters: not enough stress probes");
    Eigen::MatrixXd A(2 * zs.size(), bidx.size());
    Eigen::VectorXd bb(2 * zs.size());
    for (std::size_t j = 0; j < zs.size(); ++j) {
      for (std::size_t k = 0; k < bidx.size(); ++k) {
        Complex col = 1.0 / (zs[j] - rep.entries[bidx[k]].x);
        A(2 * j, k) = col.real();
        A(2 * j + 1, k) = col.imag();
      }
      bb(2 * j) = rhs[j].real();
      bb(2 * j + 1) = rhs[j].imag();
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(bb);
    double fit_resid = (A * c - bb).cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < bidx.size(); ++k) {
      auto& de = rep.entries[bidx[k]];
      de.accessory = Complex(c[k], 0.0);
      de.l1 = 2.0 * de.accessory;
      de.l1_error = 2.0 * (fit_resid + probe_err);
      rep.quadrature_error = std::max(rep.quadrature_error, de.l1_error);
    }
  }
  return rep;
}

std::array<double, 3> global_ward_sums(const DescendantReport& rep) {
  std::array<double, 3> sums{};
  for (int n = 0; n <= 2; ++n) {
    Complex s{0, 0};
    for (const auto& e : rep.entries) {
      Complex term = std::pow(e.x, n) * e.accessory;
      if (n >= 1) term += double(n) * std::pow(e.x, n - 1) * e.delta;
      s += term;
    }
    sums[n] = std::abs(s);
  }
  return sums;
}

std::array<double, 3> global_ward_residuals(const DescendantReport& rep) {
  std::array<double, 3> out{};
  for (int n = 0; n <= 2; ++n) {
    Complex s{0, 0};
    double scale = 0;
    for (const auto& e : rep.entries) {
      Complex term = std::pow(e.x, n) * e.accessory;
      if (n >= 1) term += double(n) * std::pow(e.x, n - 1) * e.delta;
      s += term;
      scale += std::abs(term);
    }
    out[n] = scale > 0 ? std::abs(s) / scale : 0.0;
  }
  return out;
}

Complex StressTensorModel::evaluate(Complex z) const {
  Complex t{0, 0};
  for (const auto& p : poles) {
    Complex d = z - p.x;
    t += p.delta / (d * d) + p.residue / d;
  }
  return t;
}

StressTensorModel stress_tensor(const DescendantReport& rep) {
  StressTensorModel m;
  for (const auto& e : rep.entries) {
    if (e.c == 0.0) continue;  // spectators drop out
    m.poles.push_back({e.x, e.delta, e.accessory});
  }
  return m;
}

void phi_derivatives(const IntegralEngine& eng, Complex z, Complex* d1, Complex* d2,
                     bool lo) {
  const Solution& sol = eng.solution();
  auto entries = doubled_list(sol.spec.divisor);
  // probe radius: clear of the patches
  double sep = 1e18;
  Complex zd = cayley(z);
  for (const auto& pi : sol.disc->quad->patches())
    sep = std::min(sep,
                   (std::abs(z - pi.z_half) - pi.R) * std::abs(cayley_dwdx(pi.z_half)));
  (void)zd;
  double R = std::min(0.12, 0.3 * sep);
  if (R < 5e-3) throw std::invalid_argument("phi_derivatives: probe too close to a puncture");
  IntegralEngine::Probe probe;
  for (int attempt = 0;; ++attempt) {
    try {
      probe = eng.make_probe(z, R);
      break;
    } catch (const std::invalid_argument&) {
      R *= 0.6;
      if (attempt >= 4 || R < 4e-3) throw;
    }
  }
  Complex s1{0, 0}, s2{0, 0};
  for (const auto& e : entries) {
    s1 += e.c / (z - e.x);
    s2 += -e.c / ((z - e.x) * (z - e.x));
  }
  auto f1 = [&](Complex y) { return 1.0 / (z - y); };
  auto f2 = [&](Complex y) { return -1.0 / ((z - y) * (z - y)); };
  if (d1) *d1 = s1 + eng.itot_probe(probe, f1, lo) + dw0(z) * eng.gb_bracket();
  if (d2) *d2 = s2 + eng.itot_probe(probe, f2, lo) + d2w0(z) * eng.gb_bracket();
}

Complex stress_tensor_direct(const IntegralEngine& eng, Complex z, double* err) {
  Complex d1, d2;
  phi_derivatives(eng, z, &d1, &d2, false);
  Complex t = d2 - 0.5 * d1 * d1;
  if (err) {
    Complex d1l, d2l;
    phi_derivatives(eng, z, &d1l, &d2l, true);
    *err = std::abs((d2l - 0.5 * d1l * d1l) - t);
  }
  return t;
}

Complex l2_ward(const DescendantReport& rep, int entry) {
  const auto& ek = rep.entries[entry];
  Complex s{0, 0};
  for (std::size_t l = 0; l < rep.entries.size(); ++l) {
    if ((int)l == entry) continue;
    const auto& e = rep.entries[l];
    Complex d = ek.x - e.x;
    s += e.delta / (d * d) + e.l1 / (2.0 * d);
  }
  return s;
}

Complex l2_bulk_direct(const IntegralEngine& eng, int k, double* err) {
  // (1 - a) d^2 Phi^{(k)} - (d Phi^{(k)})^2 / 2 at z_k is, by the Taylor
  // expansion of T around the double pole, the regular value of the stress
  // tensor there; the pole parts average out on circles, so the value is the
  // angular mean of the direct tensor. This avoids amplifying FE roughness
  // with 1/r^2 kernels at the puncture itself.
  const Solution& sol = eng.solution();
  auto entries = doubled_list(sol.spec.divisor);
  const auto& ek = entries[k];
  if (ek.boundary || ek.conjugate)
    throw std::invalid_argument("l2_bulk_direct: needs a bulk entry");
  const PatchInfo& pi = sol.disc->quad->patches()[ek.source];
  Complex zk = ek.x;
  double rho_max = 0.95 * zk.imag() - 0.15;
  for (const auto& pj : sol.disc->quad->patches()) {
    if (pj.pidx == ek.source) continue;
    rho_max = std::min(rho_max, std::abs(zk - pj.z_half) - 1.3 * pj.R);
  }
  double rho = std::min(1.35 * pi.R, 0.85 * rho_max);
  if (rho <= 1.02 * pi.R)
    throw std::invalid_argument("l2_bulk_direct: no room for the mean circle");
  auto circle_mean = [&](double r, double* perr) {
    const int n = 16;
    Complex acc{0, 0};
    double emax = 0;
    for (int j = 0; j < n; ++j) {
      double th = 2 * kPi * (j + 0.5) / n;
      double e1 = 0;
      acc += stress_tensor_direct(eng, zk + r * std::polar(1.0, th), &e1);
      emax = std::max(emax, e1);
    }
    if (perr) *perr = emax;
    return acc / double(n);
  };
  double e1 = 0, e2 = 0;
  Complex m1 = circle_mean(rho, &e1);
  Complex m2 = circle_mean(std::min(0.85 * rho, 0.5 * (rho + 1.02 * pi.R)), &e2);
  if (err) *err = std::abs(m1 - m2) + 0.5 * (e1 + e2);
  return m1;
}

HemReport hem_residuals(const IntegralEngine& eng, const DescendantReport& rep,
                        int probes_per_arc) {
  const Solution& sol = eng.solution();
  StressTensorModel T = stress_tensor(rep);
  HemReport out;

  // bulk: the pipeline identity (d^2 + T/2) e^{-Phi/2} = 0 with the direct T
  for (Complex z : {Complex(0.37, 1.91), Complex(-0.83, 2.3), Complex(1.7, 0.9),
                    Complex(-1.9, 1.2)}) {
    try {
      Complex d1, d2;
      phi_derivatives(eng, z, &d1, &d2);
      Complex tdir = d2 - 0.5 * d1 * d1;
      Complex resid = (0.25 * d1 * d1 - 0.5 * d2) + 0.5 * tdir;
      out.bulk_scale = std::abs(0.25 * d1 * d1) + std::abs(0.5 * d2) + std::abs(0.5 * tdir);
      out.bulk_residual = std::abs(resid);
      break;
    } catch (const std::invalid_argument&) {
      continue;
    }
  }

  // boundary probes in the arc interiors
  auto bps = sol.spec.divisor.boundary_sorted();
  const int M = (int)bps.size();
  double h = sol.disc->mesh.target_h;
  // trace derivatives through the disk angle: t(theta) = -cot(theta/2) keeps
  // the five-point stencil on the mesh scale uniformly along the axis
  auto probe_at = [&](double t, int arc) {
    double th0 = 2.0 * std::atan2(1.0, -t);  // inverse of -cot(theta/2)
    auto f = [&](double th) {
      return sol.Phi(Complex(-1.0 / std::tan(0.5 * th), 0.0));
    };
    double s = 0.55 * h;
    double f0 = f(th0), fm = f(th0 - s), fp = f(th0 + s);
    double fmm = f(th0 - 2 * s), fpp = f(th0 + 2 * s);
    double g1 = (fmm - 8 * fm + 8 * fp - fpp) / (12 * s);
    double g2 = (-fmm + 16 * fm - 30 * f0 + 16 * fp - fpp) / (12 * s * s);
    double tp = 0.5 * (1.0 + t * t);        // dt/dtheta
    double d1 = g1 / tp;
    double d2 = (g2 - g1 * t) / (tp * tp);  // t'' = t t'
    double theta = std::exp(-0.25 * f0);
    double theta2 = theta * (-0.25 * d2 + d1 * d1 / 16.0);
    double Tt = T.evaluate(Complex(t, 0)).real();
    double sg = sol.spec.sigma(arc);
    double rhs = (sg * sg - 0.5 * sol.spec.Lambda) * std::exp(0.75 * f0);
    HemBoundaryProbe pr;
    pr.t = t;
    pr.arc = arc;
    pr.res_half_quarter = theta2 + 0.5 * Tt * theta - 0.25 * rhs;
    pr.res_two = theta2 + 2.0 * Tt * theta - rhs;
    pr.scale = std::abs(theta2) + std::abs(0.5 * Tt * theta) + 0.25 * std::abs(rhs) + 1e-300;
    return pr;
  };
  if (M >= 1) {
    for (int l = 0; l < M; ++l) {
      double ta = bps[l]->location.real();
      double tb = bps[(l + 1) % M]->location.real();
      for (int j = 1; j <= probes_per_arc; ++j) {
        double t;
        if (l + 1 < M) {
          t = ta + (tb - ta) * j / (probes_per_arc + 1.0);
        } else {
          // the arc through infinity: moderate offsets on both sides
          double off = 0.45 + 0.55 * j;
          t = j % 2 == 0 ? ta + off : tb - off;
        }
        out.boundary.push_back(probe_at(t, l));
      }
    }
  } else {
    for (int j = 0; j < probes_per_arc; ++j)
      out.boundary.push_back(probe_at(-2.0 + 1.5 * j, 0));
  }
  double nh = 0, n2 = 0;
  for (const auto& p : out.boundary) {
    nh = std::max(nh, std::abs(p.res_half_quarter) / p.scale);
    n2 = std::max(n2, std::abs(p.res_two) / p.scale);
  }
  out.half_quarter_convention_wins = nh <= n2;
  out.max_half_quarter_normalized = nh;
  return out;
}

L2BoundaryResult l2_boundary_direct(const ProblemSpec& spec, int l,
                                    const std::vector<double>& schedule,
                                    const SolverOptions& opt, double r_tail) {
  L2BoundaryResult out;
  auto bps = spec.divisor.boundary_sorted();
  (void)bps;
  const auto& pk = spec.divisor.punctures[l];
  if (pk.kind != PunctureKind::Boundary)
    throw std::invalid_argument("l2_boundary_direct: bulk puncture");
  double b = pk.weight;
  double t0 = pk.location.real();

  auto disc = Disc::build(spec.divisor, opt);
  Solution plain = solve_on_disc(disc, spec, opt);
  const Vec* warm = &plain.varphi;
  Vec last;

  // sigma on the sides for the bracket term
  auto bps2 = spec.divisor.boundary_sorted();
  const int M = (int)bps2.size();
  int sorted_index = 0;
  for (int m = 0; m < M; ++m)
    if (std::abs(bps2[m]->location.real() - t0) < 1e-14) sorted_index = m;
  double sig_plus = spec.sigma(sorted_index);
  double sig_minus = spec.sigma((sorted_index - 1 + M) % M);

  for (double eps : schedule) {
    ProblemSpec rs = spec;
    rs.reg = RegMask{eps, eps};
    Solution sol = solve_on_disc(disc, rs, opt, warm);
    last = sol.varphi;
    warm = &last;
    // trace derivatives of the log-subtracted field at s_l
    double s = 0.35 * eps;
    auto tr = [&](double t) { return sol.Phi_sub(Complex(t, 0), l); };
    double f0 = tr(t0), fm = tr(t0 - s), fp = tr(t0 + s);
    double fmm = tr(t0 - 2 * s), fpp = tr(t0 + 2 * s);
    double d1 = (fmm - 8 * fm + 8 * fp - fpp) / (12 * s);
    double d2 = (-fmm + 16 * fm - 30 * f0 + 16 * fp - fpp) / (12 * s * s);
    double L2de = 0.5 * (1.0 - b) * d2 - 0.125 * d1 * d1;
    // remainder
    double delta = eps;
    double bracket =
        -(sig_plus * std::exp(0.5 * sol.Phi(Complex(t0 + eps, 0))) +
          sig_minus * std::exp(0.5 * sol.Phi(Complex(t0 - eps, 0)))) /
        (2.0 * eps * kPi);
    GaussRule gl = gauss_legendre(64);
    double lim = r_tail / delta;
    double integral = 0;
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      double t = -lim + 2 * lim * gl.x[i];
      Complex x(t0 + delta * t, delta);
      integral += 2 * lim * gl.w[i] / (1.0 + t * t) * std::exp(sol.Phi(x));
    }
    double remainder = bracket + spec.Lambda / (4.0 * kPi) * integral;
    out.sequence.push_back(L2de - remainder);
  }
  // Aitken-style extrapolation on the tail of the sequence
  std::size_t n = out.sequence.size();
  if (n >= 3) {
    double s0 = out.sequence[n - 3], s1 = out.sequence[n - 2], s2 = out.sequence[n - 1];
    double den = s2 - 2 * s1 + s0;
    if (std::abs(den) > 1e-14) {
      out.value = s2 - (s2 - s1) * (s2 - s1) / den;
    } else {
      out.value = s2;
    }
    out.uncertainty = std::abs(s2 - s1) + std::abs(out.value - s2);
  } else if (n >= 1) {
    out.value = out.sequence.back();
    out.uncertainty = n >= 2 ? std::abs(out.sequence[n - 1] - out.sequence[n - 2]) : 1e18;
    out.schedule_too_coarse = true;
  }
  if (n < 3) out.schedule_too_coarse = true;
  return out;
}

}  // namespace liouville
