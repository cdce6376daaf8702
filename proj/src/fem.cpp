#include "liouville/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "liouville/quadrature.hpp"

namespace liouville {

namespace {
std::uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}
}  // namespace

FeSpace FeSpace::build(const Mesh& m, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("FeSpace: order must be 1 or 2");
  FeSpace s;
  s.mesh = &m;
  s.order = order;
  s.dofs_per_elem = order == 1 ? 3 : 6;
  s.elem_dofs.resize(m.num_triangles());
  s.n_dofs = m.num_vertices();
  s.dof_point.assign(m.vertices.begin(), m.vertices.end());
  s.dof_on_boundary.assign(m.boundary_vertex.begin(), m.boundary_vertex.end());

  std::unordered_map<std::uint64_t, int> edge_dof;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    auto& ed = s.elem_dofs[t];
    ed = {tr[0], tr[1], tr[2], -1, -1, -1};
    if (order == 2) {
      const int pairs[3][2] = {{0, 1}, {1, 2}, {2, 0}};
      for (int e = 0; e < 3; ++e) {
        int a = tr[pairs[e][0]], b = tr[pairs[e][1]];
        auto key = ekey(a, b);
        auto it = edge_dof.find(key);
        int dof;
        if (it == edge_dof.end()) {
          dof = s.n_dofs++;
          edge_dof.emplace(key, dof);
          Complex mid = 0.5 * (m.vertices[a] + m.vertices[b]);
          s.dof_point.push_back(mid);
          s.dof_on_boundary.push_back(0);
        } else {
          dof = it->second;
        }
        ed[3 + e] = dof;
      }
    }
  }
  // boundary edge midpoints are boundary dofs
  std::unordered_map<std::uint64_t, int> tri_of_edge;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    for (int e = 0; e < 3; ++e) tri_of_edge[ekey(tr[e], tr[(e + 1) % 3])] = t;
  }
  for (const auto& be : m.boundary_edges) {
    auto it = tri_of_edge.find(ekey(be.a, be.b));
    if (it == tri_of_edge.end()) throw std::runtime_error("FeSpace: dangling boundary edge");
    FeSpace::BTrace bt;
    bt.elem = it->second;
    bt.a = be.a;
    bt.b = be.b;
    bt.arc = be.arc;
    double tha = std::atan2(m.vertices[be.a].imag(), m.vertices[be.a].real());
    double thb = std::atan2(m.vertices[be.b].imag(), m.vertices[be.b].real());
    while (thb <= tha) thb += 2 * kPi;
    bt.theta_a = tha;
    bt.theta_b = thb;
    s.btrace.push_back(bt);
    if (order == 2) {
      int mid = edge_dof.at(ekey(be.a, be.b));
      s.dof_on_boundary[mid] = 1;
    }
  }
  std::sort(s.btrace.begin(), s.btrace.end(),
            [](const BTrace& x, const BTrace& y) { return x.theta_a < y.theta_a; });
  return s;
}

void shape_values(int order, double l1, double l2, double* N) {
  double l0 = 1.0 - l1 - l2;
  if (order == 1) {
    N[0] = l0;
    N[1] = l1;
    N[2] = l2;
    return;
  }
  N[0] = l0 * (2 * l0 - 1);
  N[1] = l1 * (2 * l1 - 1);
  N[2] = l2 * (2 * l2 - 1);
  N[3] = 4 * l0 * l1;
  N[4] = 4 * l1 * l2;
  N[5] = 4 * l2 * l0;
}

void shape_gradients_ref(int order, double l1, double l2, double (*dN)[2]) {
  double l0 = 1.0 - l1 - l2;
  if (order == 1) {
    dN[0][0] = -1;
    dN[0][1] = -1;
    dN[1][0] = 1;
    dN[1][1] = 0;
    dN[2][0] = 0;
    dN[2][1] = 1;
    return;
  }
  dN[0][0] = 1 - 4 * l0;
  dN[0][1] = 1 - 4 * l0;
  dN[1][0] = 4 * l1 - 1;
  dN[1][1] = 0;
  dN[2][0] = 0;
  dN[2][1] = 4 * l2 - 1;
  dN[3][0] = 4 * (l0 - l1);
  dN[3][1] = -4 * l1;
  dN[4][0] = 4 * l2;
  dN[4][1] = 4 * l1;
  dN[5][0] = -4 * l2;
  dN[5][1] = 4 * (l0 - l2);
}

ElemGeom elem_geom(const Mesh& m, int t) {
  const auto& tr = m.triangles[t];
  Complex a = m.vertices[tr[0]], b = m.vertices[tr[1]], c = m.vertices[tr[2]];
  ElemGeom g;
  g.a = a;
  g.J << b.real() - a.real(), c.real() - a.real(), b.imag() - a.imag(), c.imag() - a.imag();
  double det = g.J.determinant();
  if (det <= 0) throw std::runtime_error("elem_geom: non-CCW or degenerate element " +
                                         std::to_string(t));
  g.Jinv = g.J.inverse();
  g.area2 = det;
  return g;
}

Locator::Locator(const Mesh& m) : mesh_(&m) {
  double avg = 0;
  for (int t = 0; t < m.num_triangles(); ++t) avg += m.longest_edge(t);
  avg /= std::max(1, m.num_triangles());
  n_ = std::clamp(static_cast<int>(2.2 / std::max(avg, 1e-3)), 8, 512);
  cell_ = 2.2 / n_;
  cells_.resize(static_cast<std::size_t>(n_) * n_);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (int v : tr) {
      x0 = std::min(x0, m.vertices[v].real());
      x1 = std::max(x1, m.vertices[v].real());
      y0 = std::min(y0, m.vertices[v].imag());
      y1 = std::max(y1, m.vertices[v].imag());
    }
    double pad = 0.05 * (x1 - x0 + y1 - y0) + 1e-12;
    int i0 = std::clamp(static_cast<int>((x0 - pad + 1.1) / cell_), 0, n_ - 1);
    int i1 = std::clamp(static_cast<int>((x1 + pad + 1.1) / cell_), 0, n_ - 1);
    int j0 = std::clamp(static_cast<int>((y0 - pad + 1.1) / cell_), 0, n_ - 1);
    int j1 = std::clamp(static_cast<int>((y1 + pad + 1.1) / cell_), 0, n_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) cells_[j * n_ + i].push_back(t);
  }
}

int Locator::cell_index(double x, double y) const {
  int i = std::clamp(static_cast<int>((x + 1.1) / cell_), 0, n_ - 1);
  int j = std::clamp(static_cast<int>((y + 1.1) / cell_), 0, n_ - 1);
  return j * n_ + i;
}

int Locator::locate(Complex p, std::array<double, 3>& bary, double tol) const {
  const Mesh& m = *mesh_;
  int best = -1;
  double best_min = -1e9;
  std::array<double, 3> best_bary{};
  auto consider = [&](int t) {
    const auto& tr = m.triangles[t];
    ElemGeom g = elem_geom(m, t);
    Eigen::Vector2d rhs(p.real() - g.a.real(), p.imag() - g.a.imag());
    Eigen::Vector2d xi = g.Jinv * rhs;
    double l1 = xi[0], l2 = xi[1], l0 = 1 - l1 - l2;
    double mn = std::min({l0, l1, l2});
    if (mn > best_min) {
      best_min = mn;
      best = t;
      best_bary = {l0, l1, l2};
    }
    (void)tr;
  };
  int ci = cell_index(p.real(), p.imag());
  int cx = ci % n_, cy = ci / n_;
  for (int ring = 0; ring < 3 && best_min < 0.0; ++ring) {
    for (int j = std::max(0, cy - ring); j <= std::min(n_ - 1, cy + ring); ++j)
      for (int i = std::max(0, cx - ring); i <= std::min(n_ - 1, cx + ring); ++i) {
        if (ring > 0 && std::abs(i - cx) != ring && std::abs(j - cy) != ring) continue;
        for (int t : cells_[j * n_ + i]) consider(t);
      }
  }
  if (best_min < -tol) {
    // full scan as a last resort (rare: far extrapolation requests)
    for (int t = 0; t < m.num_triangles(); ++t) consider(t);
  }
  if (best < 0 || best_min < -tol)
    throw std::domain_error("Locator: point outside the mesh");
  bary = best_bary;
  return best;
}

double FieldEval::value_at(const Vec& u, int elem, const std::array<double, 3>& bary) const {
  double N[6];
  shape_values(space_->order, bary[1], bary[2], N);
  const auto& ed = space_->elem_dofs[elem];
  double v = 0;
  for (int i = 0; i < space_->dofs_per_elem; ++i) v += u[ed[i]] * N[i];
  return v;
}

double FieldEval::value(const Vec& u, Complex w) const {
  std::array<double, 3> b;
  int t = loc_->locate(w, b);
  return value_at(u, t, b);
}

Eigen::Vector2d FieldEval::gradient(const Vec& u, Complex w) const {
  std::array<double, 3> b;
  int t = loc_->locate(w, b);
  ElemGeom g = elem_geom(*space_->mesh, t);
  double dN[6][2];
  shape_gradients_ref(space_->order, b[1], b[2], dN);
  const auto& ed = space_->elem_dofs[t];
  Eigen::Vector2d gref(0, 0);
  for (int i = 0; i < space_->dofs_per_elem; ++i) {
    gref[0] += u[ed[i]] * dN[i][0];
    gref[1] += u[ed[i]] * dN[i][1];
  }
  return g.Jinv.transpose() * gref;
}

Eigen::Matrix2d FieldEval::hessian(const Vec& u, Complex w) const {
  std::array<double, 3> b;
  int t = loc_->locate(w, b);
  if (space_->order == 1) return Eigen::Matrix2d::Zero();
  ElemGeom g = elem_geom(*space_->mesh, t);
  // reference hessians of the P2 basis (constant)
  static const double H[6][3] = {  // (d11, d12, d22) wrt (l1, l2)
      {4, 4, 4}, {4, 0, 0}, {0, 0, 4}, {-8, -4, 0}, {0, 4, 0}, {0, -4, -8}};
  const auto& ed = space_->elem_dofs[t];
  Eigen::Matrix2d Href = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 6; ++i) {
    Href(0, 0) += u[ed[i]] * H[i][0];
    Href(0, 1) += u[ed[i]] * H[i][1];
    Href(1, 0) += u[ed[i]] * H[i][1];
    Href(1, 1) += u[ed[i]] * H[i][2];
  }
  return g.Jinv.transpose() * Href * g.Jinv;
}

DiscreteOperators assemble(const FeSpace& s) {
  const Mesh& m = *s.mesh;
  DiscreteOperators ops;
  std::vector<Eigen::Triplet<double>> tk, tm;
  const int nd = s.dofs_per_elem;

  // stiffness: exact mid-edge rule (degree 2); mass: Duffy degree ~ 8
  TriQuad stiff_rule = tri_midedge_rule();
  for (int t = 0; t < m.num_triangles(); ++t) {
    ElemGeom g = elem_geom(m, t);
    const auto& ed = s.elem_dofs[t];
    Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(nd, nd);
    for (const auto& qp : stiff_rule.pts) {
      double dN[6][2];
      shape_gradients_ref(s.order, qp.l1, qp.l2, dN);
      Eigen::MatrixXd gx(2, nd);
      for (int i = 0; i < nd; ++i) {
        Eigen::Vector2d gr = g.Jinv.transpose() * Eigen::Vector2d(dN[i][0], dN[i][1]);
        gx(0, i) = gr[0];
        gx(1, i) = gr[1];
      }
      ke += (qp.w * g.area2) * gx.transpose() * gx;
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) tk.emplace_back(ed[i], ed[j], ke(i, j));

    TriQuad mass_rule = duffy_rule(5);
    Eigen::MatrixXd me = Eigen::MatrixXd::Zero(nd, nd);
    for (const auto& qp : mass_rule.pts) {
      double N[6];
      shape_values(s.order, qp.l1, qp.l2, N);
      Complex x = g.a + Complex(g.J(0, 0) * qp.l1 + g.J(0, 1) * qp.l2,
                                g.J(1, 0) * qp.l1 + g.J(1, 1) * qp.l2);
      double wgt = qp.w * g.area2 * disk_metric_factor(x);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) me(i, j) += wgt * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) tm.emplace_back(ed[i], ed[j], me(i, j));
  }
  ops.stiffness.resize(s.n_dofs, s.n_dofs);
  ops.stiffness.setFromTriplets(tk.begin(), tk.end());
  ops.bulk_mass.resize(s.n_dofs, s.n_dofs);
  ops.bulk_mass.setFromTriplets(tm.begin(), tm.end());
  ops.lumped_bulk = ops.bulk_mass * Vec::Ones(s.n_dofs);

  // per-arc boundary mass along the true circular arc, weight e^{what} = 1 on |w|=1
  int max_arc = 0;
  for (const auto& bt : s.btrace) max_arc = std::max(max_arc, bt.arc);
  std::vector<std::vector<Eigen::Triplet<double>>> tb(max_arc + 1);
  GaussRule gl = gauss_legendre(6);
  for (const auto& bt : s.btrace) {
    ElemGeom g = elem_geom(m, bt.elem);
    const auto& ed = s.elem_dofs[bt.elem];
    Eigen::MatrixXd be = Eigen::MatrixXd::Zero(nd, nd);
    for (int q = 0; q < (int)gl.x.size(); ++q) {
      double th = bt.theta_a + (bt.theta_b - bt.theta_a) * gl.x[q];
      Complex p(std::cos(th), std::sin(th));
      Eigen::Vector2d rhs(p.real() - g.a.real(), p.imag() - g.a.imag());
      Eigen::Vector2d xi = g.Jinv * rhs;
      double N[6];
      shape_values(s.order, xi[0], xi[1], N);
      double wgt = gl.w[q] * (bt.theta_b - bt.theta_a) * std::exp(disk_metric_exponent(p));
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) be(i, j) += wgt * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) tb[bt.arc].emplace_back(ed[i], ed[j], be(i, j));
  }
  ops.boundary_mass.resize(max_arc + 1);
  for (int a = 0; a <= max_arc; ++a) {
    ops.boundary_mass[a].resize(s.n_dofs, s.n_dofs);
    ops.boundary_mass[a].setFromTriplets(tb[a].begin(), tb[a].end());
  }
  return ops;
}

SpMat assemble_weighted_mass(const FeSpace& s, const std::function<double(Complex)>& weight,
                             int duffy_n) {
  const Mesh& m = *s.mesh;
  std::vector<Eigen::Triplet<double>> tm;
  const int nd = s.dofs_per_elem;
  TriQuad rule = duffy_rule(duffy_n);
  for (int t = 0; t < m.num_triangles(); ++t) {
    ElemGeom g = elem_geom(m, t);
    const auto& ed = s.elem_dofs[t];
    Eigen::MatrixXd me = Eigen::MatrixXd::Zero(nd, nd);
    for (const auto& qp : rule.pts) {
      double N[6];
      shape_values(s.order, qp.l1, qp.l2, N);
      Complex x = g.a + Complex(g.J(0, 0) * qp.l1 + g.J(0, 1) * qp.l2,
                                g.J(1, 0) * qp.l1 + g.J(1, 1) * qp.l2);
      double wgt = qp.w * g.area2 * weight(x);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) me(i, j) += wgt * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) tm.emplace_back(ed[i], ed[j], me(i, j));
  }
  SpMat out(s.n_dofs, s.n_dofs);
  out.setFromTriplets(tm.begin(), tm.end());
  return out;
}

SpMat assemble_weighted_boundary_mass(const FeSpace& s,
                                      const std::function<double(Complex, int)>& weight_arc) {
  const int nd = s.dofs_per_elem;
  std::vector<Eigen::Triplet<double>> tb;
  GaussRule gl = gauss_legendre(6);
  for (const auto& bt : s.btrace) {
    ElemGeom g = elem_geom(*s.mesh, bt.elem);
    const auto& ed = s.elem_dofs[bt.elem];
    Eigen::MatrixXd be = Eigen::MatrixXd::Zero(nd, nd);
    for (int q = 0; q < (int)gl.x.size(); ++q) {
      double th = bt.theta_a + (bt.theta_b - bt.theta_a) * gl.x[q];
      Complex p(std::cos(th), std::sin(th));
      Eigen::Vector2d xi = g.Jinv * Eigen::Vector2d(p.real() - g.a.real(), p.imag() - g.a.imag());
      double N[6];
      shape_values(s.order, xi[0], xi[1], N);
      double wgt = gl.w[q] * (bt.theta_b - bt.theta_a) * weight_arc(p, bt.arc);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) be(i, j) += wgt * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) tb.emplace_back(ed[i], ed[j], be(i, j));
  }
  SpMat out(s.n_dofs, s.n_dofs);
  out.setFromTriplets(tb.begin(), tb.end());
  return out;
}

}  // namespace liouville
