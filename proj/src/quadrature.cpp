#include "liouville/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace liouville {

namespace {

GaussRule golub_welsch(const std::vector<double>& diag, const std::vector<double>& off,
                       double mu0) {
  int n = (int)diag.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = diag[i];
    if (i + 1 < n) {
      J(i, i + 1) = off[i];
      J(i + 1, i) = off[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = es.eigenvalues()[i];
    double v0 = es.eigenvectors()(0, i);
    r.w[i] = mu0 * v0 * v0;
  }
  return r;
}

}  // namespace

GaussRule gauss_legendre(int n) {
  std::vector<double> a(n, 0.0), b(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  GaussRule r = golub_welsch(a, b, 2.0);
  for (int i = 0; i < n; ++i) {
    r.x[i] = 0.5 * (r.x[i] + 1.0);
    r.w[i] *= 0.5;
  }
  return r;
}

GaussRule gauss_jacobi01(int n, double beta) {
  if (beta <= -1.0) throw std::invalid_argument("gauss_jacobi01: beta must be > -1");
  std::vector<double> a(n), b(std::max(0, n - 1));
  a[0] = beta / (beta + 2.0);
  for (int k = 1; k < n; ++k) {
    double d = 2.0 * k + beta;
    a[k] = beta * beta / (d * (d + 2.0));
  }
  if (n > 1) b[0] = std::sqrt(4.0 * (1.0 + beta) / ((2.0 + beta) * (2.0 + beta) * (3.0 + beta)));
  for (int k = 2; k < n; ++k) {
    double d = 2.0 * k + beta;
    double num = 4.0 * k * k * (k + beta) * (k + beta);
    double den = d * d * (d + 1.0) * (d - 1.0);
    b[k - 1] = std::sqrt(num / den);
  }
  double mu0 = std::pow(2.0, beta + 1.0) / (beta + 1.0);
  GaussRule r = golub_welsch(a, b, mu0);
  double scale = std::pow(2.0, -beta - 1.0);
  for (int i = 0; i < n; ++i) {
    r.x[i] = 0.5 * (r.x[i] + 1.0);
    r.w[i] *= scale;
  }
  return r;
}

TriQuad tri_midedge_rule() {
  TriQuad q;
  q.pts = {{0.5, 0.0, 1.0 / 6.0}, {0.5, 0.5, 1.0 / 6.0}, {0.0, 0.5, 1.0 / 6.0}};
  return q;
}

TriQuad duffy_rule(int n) {
  GaussRule gu = gauss_jacobi01(n, 1.0);  // weight u
  GaussRule gv = gauss_legendre(n);
  TriQuad q;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double u = gu.x[i], v = gv.x[j];
      q.pts.push_back({u * (1.0 - v), u * v, gu.w[i] * gv.w[j]});
    }
  return q;
}

PhysQuad duffy_singular_rule(const Mesh& m, int tri, int lv, double beta, int n) {
  const auto& tr = m.triangles[tri];
  Complex p = m.vertices[tr[lv]];
  Complex b = m.vertices[tr[(lv + 1) % 3]];
  Complex c = m.vertices[tr[(lv + 2) % 3]];
  double area2 = std::abs((b.real() - p.real()) * (c.imag() - p.imag()) -
                          (b.imag() - p.imag()) * (c.real() - p.real()));
  GaussRule gu = gauss_jacobi01(n, beta + 1.0);
  GaussRule gv = gauss_legendre(n);
  PhysQuad q;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double u = gu.x[i], v = gv.x[j];
      Complex x = p + u * ((1.0 - v) * (b - p) + v * (c - p));
      q.pts.push_back(x);
      q.w.push_back(area2 * gu.w[i] * gv.w[j] * std::pow(u, -beta));
    }
  return q;
}

double patch_cutoff(double t) {
  // 1 on [0,1/2]; a quintic polynomial of 2(t-1/2) on [1/2,1]; 0 beyond.
  // Radial rules split at t = 1/2 so the polynomial piece is integrated exactly.
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  double s = 2.0 * (t - 0.5);
  double s3 = s * s * s;
  return 1.0 - (10 * s3 - 15 * s3 * s + 6 * s3 * s * s);
}

// ---- radial sub-rules shared by all patch builders ----
namespace {

struct RadialNode {
  double r;
  double wr;  // weight for the full integrand (singular factor handled)
  double chi;
};

// nodes on [0, R]: Gauss-Jacobi matched to r^expo * r dr on [0, R/2] where
// chi == 1, then Gauss-Legendre times the (polynomial) cutoff on [R/2, R]
std::vector<RadialNode> radial_singular(double R, double expo, int n_r) {
  std::vector<RadialNode> out;
  GaussRule gj = gauss_jacobi01(n_r, expo + 1.0);
  double Rh = 0.5 * R;
  for (int i = 0; i < n_r; ++i) {
    double r = Rh * gj.x[i];
    out.push_back({r, gj.w[i] * std::pow(Rh, expo + 2.0) * std::pow(r, -expo), 1.0});
  }
  GaussRule gl = gauss_legendre(std::max(10, n_r / 2));
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    double r = Rh + Rh * gl.x[i];
    double chi = patch_cutoff(r / R);
    if (chi == 0) continue;
    out.push_back({r, gl.w[i] * Rh * r, chi});
  }
  return out;
}

// smooth variant: geometric Gauss-Legendre panels toward 0 (robust for bare
// and logarithmic integrands), same outer cutoff piece
std::vector<RadialNode> radial_smooth(double R, int n_panels, int n_per) {
  std::vector<RadialNode> out;
  GaussRule gl = gauss_legendre(n_per);
  double hi = 0.5 * R;
  for (int panel = 0; panel <= n_panels; ++panel) {
    double lo = panel == n_panels ? 0.0 : hi * 0.5;
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      double r = lo + (hi - lo) * gl.x[i];
      if (r <= 0) continue;
      out.push_back({r, gl.w[i] * (hi - lo) * r, 1.0});
    }
    hi = lo;
  }
  GaussRule go = gauss_legendre(std::max(10, n_per));
  double Rh = 0.5 * R;
  for (std::size_t i = 0; i < go.x.size(); ++i) {
    double r = Rh + Rh * go.x[i];
    double chi = patch_cutoff(r / R);
    if (chi == 0) continue;
    out.push_back({r, go.w[i] * Rh * r, chi});
  }
  return out;
}

std::vector<RadialNode> line_smooth(double R, int n_panels, int n_per) {
  std::vector<RadialNode> out;
  GaussRule gl = gauss_legendre(n_per);
  double hi = 0.5 * R;
  for (int panel = 0; panel <= n_panels; ++panel) {
    double lo = panel == n_panels ? 0.0 : hi * 0.5;
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      double r = lo + (hi - lo) * gl.x[i];
      if (r <= 0) continue;
      out.push_back({r, gl.w[i] * (hi - lo), 1.0});
    }
    hi = lo;
  }
  GaussRule go = gauss_legendre(std::max(10, n_per));
  double Rh = 0.5 * R;
  for (std::size_t i = 0; i < go.x.size(); ++i) {
    double r = Rh + Rh * go.x[i];
    double chi = patch_cutoff(r / R);
    if (chi == 0) continue;
    out.push_back({r, go.w[i] * Rh, chi});
  }
  return out;
}

// 1D line version (no r dr jacobian)
std::vector<RadialNode> line_singular(double R, double expo, int n_r) {
  std::vector<RadialNode> out;
  GaussRule gj = gauss_jacobi01(n_r, expo);
  double Rh = 0.5 * R;
  for (int i = 0; i < n_r; ++i) {
    double r = Rh * gj.x[i];
    out.push_back({r, gj.w[i] * std::pow(Rh, expo + 1.0) * std::pow(r, -expo), 1.0});
  }
  GaussRule gl = gauss_legendre(std::max(10, n_r / 2));
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    double r = Rh + Rh * gl.x[i];
    double chi = patch_cutoff(r / R);
    if (chi == 0) continue;
    out.push_back({r, gl.w[i] * Rh, chi});
  }
  return out;
}

}  // namespace

SingularQuadrature::SingularQuadrature(const FeSpace& space, const Locator& loc,
                                       const Divisor& d, const QuadParams& params)
    : space_(&space), loc_(&loc), div_(&d), params_(params) {
  std::vector<Complex> pd;
  for (const auto& p : d.punctures) pd.push_back(cayley(p.location));
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& p = d.punctures[k];
    PatchInfo pi;
    pi.pidx = (int)k;
    pi.boundary = p.kind == PunctureKind::Boundary;
    pi.center_disk = pd[k];
    pi.z_half = p.location;
    pi.z_real = p.location.real();
    double min_disk = 1e9, min_half = 1e9;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (j == k) continue;
      min_disk = std::min(min_disk, std::abs(pd[k] - pd[j]));
      min_half = std::min(min_half, std::abs(p.location - d.punctures[j].location));
    }
    double scale = std::abs(cayley_dwdx(p.location));
    pi.bulk_exponent = 2.0 * p.weight;
    pi.line_exponent = pi.boundary ? p.weight : 0.0;
    pi.R = std::min({0.28 / scale, 0.33 * min_disk / scale, 0.33 * min_half});
    if (!pi.boundary) pi.R = std::min(pi.R, 0.8 * p.location.imag());
    if (pi.R <= 0) throw std::runtime_error("SingularQuadrature: degenerate patch radius");
    patches_.push_back(pi);
  }
  build_set(hi_, params_, false);
  QuadParams lo = params_;
  lo.far_n = std::max(2, params_.far_n - 1);
  lo.n_r = std::max(8, (2 * params_.n_r) / 3);
  lo.n_theta = std::max(12, params_.n_theta / 2);
  lo.bdry_gl = std::max(3, params_.bdry_gl - 2);
  lo.n_r_line = std::max(8, (2 * params_.n_r_line) / 3);
  build_set(lo_, lo, false);
  build_set(hi_smooth_, params_, true);
  build_set(lo_smooth_, lo, true);
}

double SingularQuadrature::far_mask_bulk(Complex, Complex x) const {
  double mask = 1.0;
  for (const auto& pi : patches_) {
    mask *= 1.0 - patch_cutoff(std::abs(x - pi.z_half) / pi.R);
    if (mask == 0.0) return 0.0;
  }
  return mask;
}

double SingularQuadrature::far_mask_bdry(double t) const {
  double mask = 1.0;
  for (const auto& pi : patches_) {
    if (!pi.boundary) continue;
    mask *= 1.0 - patch_cutoff(std::abs(t - pi.z_real) / pi.R);
    if (mask == 0.0) return 0.0;
  }
  return mask;
}

void SingularQuadrature::fill_point(BulkQP& q) const {
  std::array<double, 3> bary;
  q.elem = loc_->locate(q.w, bary);
  double N[6];
  shape_values(space_->order, bary[1], bary[2], N);
  for (int i = 0; i < 6; ++i) q.shape[i] = i < space_->dofs_per_elem ? N[i] : 0.0;
  q.EH = std::exp(h_field(*div_, q.x));
}

void SingularQuadrature::build_set(QuadratureSet& qs, const QuadParams& p, bool smooth) const {
  const Mesh& m = *space_->mesh;
  const Divisor& d = *div_;
  const int n_panels = 10;

  // far field over elements
  TriQuad rule = duffy_rule(p.far_n);
  for (int t = 0; t < m.num_triangles(); ++t) {
    ElemGeom g = elem_geom(m, t);
    for (const auto& qp : rule.pts) {
      Complex w = g.a + Complex(g.J(0, 0) * qp.l1 + g.J(0, 1) * qp.l2,
                                g.J(1, 0) * qp.l1 + g.J(1, 1) * qp.l2);
      Complex x = cayley_inv(w);
      double mask = far_mask_bulk(w, x);
      if (mask < 1e-14) continue;
      BulkQP q;
      q.w = w;
      q.x = x;
      q.elem = t;
      double N[6];
      shape_values(space_->order, qp.l1, qp.l2, N);
      for (int i = 0; i < 6; ++i) q.shape[i] = i < space_->dofs_per_elem ? N[i] : 0.0;
      q.W0 = qp.w * g.area2 * disk_metric_factor(w) * mask;
      q.EH = std::exp(h_field(d, x));
      qs.bulk.push_back(q);
    }
  }

  // puncture patches (bulk part)
  for (std::size_t pidx = 0; pidx < patches_.size(); ++pidx) {
    const auto& pi = patches_[pidx];
    auto radial = smooth ? radial_smooth(pi.R, n_panels, std::max(6, p.n_r / 3))
                         : radial_singular(pi.R, pi.bulk_exponent, p.n_r);
    if (!pi.boundary) {
      for (const auto& rn : radial) {
        for (int j = 0; j < p.n_theta; ++j) {
          double th = 2.0 * kPi * (j + 0.5) / p.n_theta;
          BulkQP q;
          q.x = pi.z_half + rn.r * Complex(std::cos(th), std::sin(th));
          q.w = cayley(q.x);
          q.W0 = rn.wr * rn.chi * (2.0 * kPi / p.n_theta) * metric_factor(q.x);
          fill_point(q);
          q.patch = (int)pidx;
          qs.bulk.push_back(q);
        }
      }
    } else {
      GaussRule gt = gauss_legendre(std::max(8, p.n_theta / 2));
      Complex s(pi.z_real, 0.0);
      for (const auto& rn : radial) {
        for (std::size_t j = 0; j < gt.x.size(); ++j) {
          double th = kPi * gt.x[j];
          BulkQP q;
          q.x = s + rn.r * Complex(std::cos(th), std::sin(th));
          q.w = cayley(q.x);
          q.W0 = rn.wr * rn.chi * kPi * gt.w[j] * metric_factor(q.x);
          fill_point(q);
          q.patch = (int)pidx;
          qs.bulk.push_back(q);
        }
      }
    }
  }

  // sanity: disjoint patch supports
  for (const auto& q : qs.bulk) {
    int inside = 0;
    for (const auto& pi : patches_)
      if (std::abs(q.x - pi.z_half) / pi.R < 1.0) ++inside;
    if (inside > 1) throw std::runtime_error("SingularQuadrature: overlapping patches");
  }

  // boundary far field along the arcs; edges split at the cutoff kink radii
  GaussRule gl = gauss_legendre(p.bdry_gl);
  auto bps = d.boundary_sorted();
  const int M = (int)bps.size();
  std::vector<double> kink_thetas;
  for (const auto& pi : patches_) {
    if (!pi.boundary) continue;
    for (double fr : {0.5, 1.0}) {
      for (double sgn : {-1.0, 1.0}) {
        double t = pi.z_real + sgn * fr * pi.R;
        Complex w = cayley(Complex(t, 0));
        kink_thetas.push_back(std::atan2(w.imag(), w.real()));
      }
    }
  }
  for (const auto& bt : space_->btrace) {
    ElemGeom g = elem_geom(m, bt.elem);
    std::vector<double> cuts{bt.theta_a, bt.theta_b};
    for (double th : kink_thetas)
      for (double shift : {0.0, 2 * kPi, -2 * kPi}) {
        double v = th + shift;
        if (v > bt.theta_a + 1e-13 && v < bt.theta_b - 1e-13) cuts.push_back(v);
      }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
      double t0 = cuts[seg], t1 = cuts[seg + 1];
      if (t1 - t0 < 1e-14) continue;
      for (std::size_t qx = 0; qx < gl.x.size(); ++qx) {
        double th = t0 + (t1 - t0) * gl.x[qx];
        BdryQP q;
        q.w = Complex(std::cos(th), std::sin(th));
        q.t_inf = std::abs(q.w - Complex(1.0, 0.0)) < 1e-12;
        Complex x = q.t_inf ? Complex(0, 0) : cayley_inv(q.w);
        q.t = q.t_inf ? 0.0 : x.real();
        double mask = q.t_inf ? 1.0 : far_mask_bdry(q.t);
        if (mask < 1e-14) continue;
        q.elem = bt.elem;
        Eigen::Vector2d xi =
            g.Jinv * Eigen::Vector2d(q.w.real() - g.a.real(), q.w.imag() - g.a.imag());
        double N[6];
        shape_values(space_->order, xi[0], xi[1], N);
        for (int i = 0; i < 6; ++i) q.shape[i] = i < space_->dofs_per_elem ? N[i] : 0.0;
        q.W0 = gl.w[qx] * (t1 - t0) * std::exp(disk_metric_exponent(q.w)) * mask;
        q.EH2 =
            std::exp(0.5 * (q.t_inf ? h_field_at_infinity(d) : h_field(d, Complex(q.t, 0))));
        q.arc = bt.arc;
        qs.bdry.push_back(q);
      }
    }
  }

  // boundary line patches at boundary punctures
  for (std::size_t pidx = 0; pidx < patches_.size(); ++pidx) {
    const auto& pi = patches_[pidx];
    if (!pi.boundary) continue;
    int sorted_index = 0;
    for (int l = 0; l < M; ++l)
      if (std::abs(bps[l]->location.real() - pi.z_real) < 1e-14) sorted_index = l;
    auto radial = smooth ? line_smooth(pi.R, n_panels, std::max(6, p.n_r_line / 3))
                         : line_singular(pi.R, pi.line_exponent, p.n_r_line);
    for (int side = 0; side < 2; ++side) {
      int arc = side == 1 ? sorted_index : (sorted_index - 1 + M) % M;
      for (const auto& rn : radial) {
        double t = pi.z_real + (side == 1 ? rn.r : -rn.r);
        BdryQP q;
        q.t = t;
        q.t_inf = false;
        q.w = cayley(Complex(t, 0.0));
        std::array<double, 3> bary;
        q.elem = loc_->locate(q.w, bary);
        double N[6];
        shape_values(space_->order, bary[1], bary[2], N);
        for (int ii = 0; ii < 6; ++ii) q.shape[ii] = ii < space_->dofs_per_elem ? N[ii] : 0.0;
        q.W0 = rn.wr * rn.chi * std::exp(conformal_exponent(Complex(t, 0)));
        q.EH2 = std::exp(0.5 * h_field(d, Complex(t, 0)));
        q.arc = arc;
        q.patch = (int)pidx;
        qs.bdry.push_back(q);
      }
    }
  }
}

std::vector<BulkQP> SingularQuadrature::probe_patch(Complex probe_half, double R_disk,
                                                    int n_panels, int n_theta) const {
  Complex pc = cayley(probe_half);
  for (const auto& pi : patches_)
    if (std::abs(probe_half - pi.z_half) < pi.R)
      throw std::invalid_argument("probe_patch: probe inside a puncture patch");
  std::vector<BulkQP> out;
  auto radial = radial_smooth(R_disk, n_panels, 8);
  for (const auto& rn : radial) {
    for (int j = 0; j < n_theta; ++j) {
      double th = 2.0 * kPi * (j + 0.5) / n_theta;
      BulkQP q;
      q.w = pc + rn.r * Complex(std::cos(th), std::sin(th));
      q.x = cayley_inv(q.w);
      // the puncture cutoffs stay with their patches: mask them off here so
      // overlapping probe and puncture regions still partition to one
      double mask = far_mask_bulk(q.w, q.x);
      if (mask < 1e-14) continue;
      q.W0 = rn.wr * rn.chi * (2.0 * kPi / n_theta) * disk_metric_factor(q.w) * mask;
      fill_point(q);
      out.push_back(q);
    }
  }
  return out;
}

double SingularQuadrature::probe_mask(Complex w, Complex probe_disk, double R_disk) const {
  return 1.0 - patch_cutoff(std::abs(w - probe_disk) / R_disk);
}

SingularQuadrature::ProbeQuad SingularQuadrature::make_probe_quad(Complex probe_half,
                                                                  double R_disk, int n_panels,
                                                                  int n_theta,
                                                                  int subdiv) const {
  ProbeQuad pq;
  pq.probe_disk = cayley(probe_half);
  pq.R = R_disk;
  pq.patch = probe_patch(probe_half, R_disk, n_panels, n_theta);

  const Mesh& m = *space_->mesh;
  pq.replaced_elem.assign(m.num_triangles(), 0);
  for (int t = 0; t < m.num_triangles(); ++t) {
    double dmin = 1e18;
    for (int v : m.triangles[t]) dmin = std::min(dmin, std::abs(m.vertices[v] - pq.probe_disk));
    if (dmin - m.longest_edge(t) <= R_disk) pq.replaced_elem[t] = 1;
  }
  // consumers drop only far-field entries on replaced elements; puncture
  // patch points keep their weights, and the probe patch is masked by the
  // puncture cutoffs, so overlapping regions still partition to one
  TriQuad rule = duffy_rule(4);
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (!pq.replaced_elem[t]) continue;
    ElemGeom g = elem_geom(m, t);
    // subdivide the reference triangle uniformly and rule each cell
    int nside = 1 << subdiv;
    double inv = 1.0 / nside;
    for (int i = 0; i < nside; ++i) {
      for (int j = 0; j < nside - i; ++j) {
        // two cells per lattice square (one for the last row)
        for (int flip = 0; flip < (j < nside - i - 1 ? 2 : 1); ++flip) {
          double l1a = i * inv, l2a = j * inv;
          double c1[3], c2[3];
          if (flip == 0) {
            c1[0] = l1a;
            c2[0] = l2a;
            c1[1] = l1a + inv;
            c2[1] = l2a;
            c1[2] = l1a;
            c2[2] = l2a + inv;
          } else {
            c1[0] = l1a + inv;
            c2[0] = l2a;
            c1[1] = l1a + inv;
            c2[1] = l2a + inv;
            c1[2] = l1a;
            c2[2] = l2a + inv;
          }
          for (const auto& qp : rule.pts) {
            double l0 = 1.0 - qp.l1 - qp.l2;
            double l1 = l0 * c1[0] + qp.l1 * c1[1] + qp.l2 * c1[2];
            double l2 = l0 * c2[0] + qp.l1 * c2[1] + qp.l2 * c2[2];
            BulkQP q;
            q.w = g.a + Complex(g.J(0, 0) * l1 + g.J(0, 1) * l2,
                                g.J(1, 0) * l1 + g.J(1, 1) * l2);
            q.x = cayley_inv(q.w);
            double mask =
                far_mask_bulk(q.w, q.x) * probe_mask(q.w, pq.probe_disk, R_disk);
            if (mask < 1e-14) continue;
            q.elem = t;
            double N[6];
            shape_values(space_->order, l1, l2, N);
            for (int k = 0; k < 6; ++k) q.shape[k] = k < space_->dofs_per_elem ? N[k] : 0.0;
            q.W0 = qp.w * (inv * inv) * g.area2 * disk_metric_factor(q.w) * mask;
            q.EH = std::exp(h_field(*div_, q.x));
            pq.band.push_back(q);
          }
        }
      }
    }
  }
  return pq;
}

}  // namespace liouville
