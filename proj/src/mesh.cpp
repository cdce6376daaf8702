#include "liouville/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace liouville {

namespace {

using ld = long double;

double tri_area(const Complex& a, const Complex& b, const Complex& c) {
  return 0.5 * ((b.real() - a.real()) * (c.imag() - a.imag()) -
                (b.imag() - a.imag()) * (c.real() - a.real()));
}

ld orient(const Complex& a, const Complex& b, const Complex& c) {
  ld abx = (ld)b.real() - a.real(), aby = (ld)b.imag() - a.imag();
  ld acx = (ld)c.real() - a.real(), acy = (ld)c.imag() - a.imag();
  return abx * acy - aby * acx;
}

// > 0 iff p strictly inside the circumcircle of CCW triangle (a,b,c).
ld incircle(const Complex& a, const Complex& b, const Complex& c, const Complex& p) {
  ld ax = (ld)a.real() - p.real(), ay = (ld)a.imag() - p.imag();
  ld bx = (ld)b.real() - p.real(), by = (ld)b.imag() - p.imag();
  ld cx = (ld)c.real() - p.real(), cy = (ld)c.imag() - p.imag();
  ld a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
}

std::uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// ---------------- Bowyer-Watson incremental Delaunay ----------------

struct Delaunay {
  std::vector<Complex> pts;
  struct Tri {
    int v[3];
    int nb[3];  // neighbor across edge opposite to v[i]
    bool alive = true;
  };
  std::vector<Tri> tris;

  int other_vertex(const Tri& t, int a, int b) const {
    for (int i = 0; i < 3; ++i)
      if (t.v[i] != a && t.v[i] != b) return t.v[i];
    return -1;
  }

  void run(const std::vector<Complex>& input) {
    pts = input;
    // super-triangle well outside the unit disk
    int s0 = (int)pts.size(), s1 = s0 + 1, s2 = s0 + 2;
    pts.push_back({-8.0, -6.0});
    pts.push_back({8.0, -6.0});
    pts.push_back({0.0, 10.0});
    tris.push_back({{s0, s1, s2}, {-1, -1, -1}, true});
    int hint = 0;
    for (int i = 0; i < s0; ++i) hint = insert(i, hint);
  }

  int locate(const Complex& p, int hint) const {
    int t = hint;
    if (t < 0 || t >= (int)tris.size() || !tris[t].alive) t = first_alive();
    for (int step = 0; step < (int)tris.size() + 8; ++step) {
      const Tri& tr = tris[t];
      int cross = -1;
      for (int e = 0; e < 3; ++e) {
        const Complex& a = pts[tr.v[(e + 1) % 3]];
        const Complex& b = pts[tr.v[(e + 2) % 3]];
        if (orient(a, b, p) < 0) {
          cross = e;
          break;
        }
      }
      if (cross < 0) return t;
      int nxt = tr.nb[cross];
      if (nxt < 0 || !tris[nxt].alive) return t;
      t = nxt;
    }
    // fallback: linear scan
    for (int i = 0; i < (int)tris.size(); ++i)
      if (tris[i].alive && contains(i, p)) return i;
    return first_alive();
  }

  bool contains(int t, const Complex& p) const {
    const Tri& tr = tris[t];
    for (int e = 0; e < 3; ++e)
      if (orient(pts[tr.v[(e + 1) % 3]], pts[tr.v[(e + 2) % 3]], p) < 0) return false;
    return true;
  }

  int first_alive() const {
    for (int i = (int)tris.size() - 1; i >= 0; --i)
      if (tris[i].alive) return i;
    throw std::runtime_error("delaunay: no triangles");
  }

  int insert(int ip, int hint) {
    const Complex p = pts[ip];
    int seed = locate(p, hint);
    // grow cavity of triangles whose circumcircle contains p
    std::vector<int> cavity;
    std::vector<char> in_cavity(tris.size(), 0);
    std::vector<int> stack{seed};
    if (incircle(pts[tris[seed].v[0]], pts[tris[seed].v[1]], pts[tris[seed].v[2]], p) <= 0) {
      // numerical edge case: p on/outside located circumcircle; scan neighbors
      bool found = false;
      for (int i = 0; i < (int)tris.size() && !found; ++i)
        if (tris[i].alive &&
            incircle(pts[tris[i].v[0]], pts[tris[i].v[1]], pts[tris[i].v[2]], p) > 0) {
          stack = {i};
          found = true;
        }
      if (!found) throw std::runtime_error("delaunay: insertion failed (degenerate input)");
    }
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      if (t < 0 || !tris[t].alive || in_cavity[t]) continue;
      if (incircle(pts[tris[t].v[0]], pts[tris[t].v[1]], pts[tris[t].v[2]], p) <= 0) continue;
      in_cavity[t] = 1;
      cavity.push_back(t);
      for (int e = 0; e < 3; ++e) stack.push_back(tris[t].nb[e]);
    }
    // boundary edges of the cavity (edge, outside-neighbor)
    struct CEdge {
      int a, b, outside;
    };
    std::vector<CEdge> border;
    for (int t : cavity) {
      for (int e = 0; e < 3; ++e) {
        int nb = tris[t].nb[e];
        if (nb < 0 || !in_cavity[nb]) {
          int a = tris[t].v[(e + 1) % 3], b = tris[t].v[(e + 2) % 3];
          border.push_back({a, b, nb});
        }
      }
    }
    for (int t : cavity) tris[t].alive = false;
    // fan around p
    std::vector<int> created;
    for (const auto& ce : border) {
      Tri nt;
      nt.v[0] = ip;
      nt.v[1] = ce.a;
      nt.v[2] = ce.b;
      nt.nb[0] = ce.outside;
      nt.nb[1] = -1;  // across (ip, ce.b)
      nt.nb[2] = -1;  // across (ip, ce.a)
      int id = (int)tris.size();
      tris.push_back(nt);
      created.push_back(id);
      if (ce.outside >= 0) {
        Tri& ot = tris[ce.outside];
        for (int e = 0; e < 3; ++e) {
          int oa = ot.v[(e + 1) % 3], ob = ot.v[(e + 2) % 3];
          if ((oa == ce.a && ob == ce.b) || (oa == ce.b && ob == ce.a)) ot.nb[e] = id;
        }
      }
    }
    // link fan neighbors via shared (ip, x) spokes
    std::unordered_map<std::uint64_t, std::pair<int, int>> spokes;  // key(ip,x) -> id+1 pair
    for (int id : created) {
      for (int x : {tris[id].v[1], tris[id].v[2]}) {
        auto& sl = spokes[ekey(ip, x)];
        if (sl.first == 0)
          sl.first = id + 1;
        else
          sl.second = id + 1;
      }
    }
    for (auto& [k, pr] : spokes) {
      (void)k;
      if (pr.first > 0 && pr.second > 0) {
        int t1 = pr.first - 1, t2 = pr.second - 1;
        // in t1 find edge (ip, x) shared with t2
        for (int e = 0; e < 3; ++e) {
          int a = tris[t1].v[(e + 1) % 3], b = tris[t1].v[(e + 2) % 3];
          if (a == ip || b == ip) {
            int x = a == ip ? b : a;
            for (int f = 0; f < 3; ++f) {
              int c = tris[t2].v[(f + 1) % 3], d2 = tris[t2].v[(f + 2) % 3];
              if ((c == ip && d2 == x) || (d2 == ip && c == x)) {
                tris[t1].nb[e] = t2;
                tris[t2].nb[f] = t1;
              }
            }
          }
        }
      }
    }
    return created.empty() ? first_alive() : created.front();
  }
};

// ---------------- dynamic mesh with longest-edge bisection ----------------

struct DynMesh {
  std::vector<Complex> V;
  std::vector<char> bflag;
  struct Tri {
    int v[3];
    bool alive = true;
  };
  std::vector<Tri> T;
  std::unordered_map<std::uint64_t, std::array<int, 2>> e2t;
  std::map<std::pair<int, int>, int> barc;  // undirected boundary edge -> arc
  std::unordered_map<std::uint64_t, int> midpoint;

  void add_edge_ref(int a, int b, int t) {
    auto& s = e2t[ekey(a, b)];
    if (s[0] == t + 1 || s[1] == t + 1) return;
    if (s[0] == 0)
      s[0] = t + 1;
    else if (s[1] == 0)
      s[1] = t + 1;
    else
      throw std::runtime_error("mesh: non-manifold edge");
  }
  void del_edge_ref(int a, int b, int t) {
    auto it = e2t.find(ekey(a, b));
    if (it == e2t.end()) return;
    if (it->second[0] == t + 1) it->second[0] = 0;
    if (it->second[1] == t + 1) it->second[1] = 0;
    if (it->second[0] == 0 && it->second[1] == 0) e2t.erase(it);
  }
  int add_tri(int a, int b, int c) {
    if (tri_area(V[a], V[b], V[c]) < 0) std::swap(b, c);
    int id = (int)T.size();
    T.push_back({{a, b, c}, true});
    add_edge_ref(a, b, id);
    add_edge_ref(b, c, id);
    add_edge_ref(c, a, id);
    return id;
  }
  void kill_tri(int t) {
    T[t].alive = false;
    del_edge_ref(T[t].v[0], T[t].v[1], t);
    del_edge_ref(T[t].v[1], T[t].v[2], t);
    del_edge_ref(T[t].v[2], T[t].v[0], t);
  }
  int neighbor(int t, int a, int b) const {
    auto it = e2t.find(ekey(a, b));
    if (it == e2t.end()) return -1;
    for (int s : it->second)
      if (s != 0 && s != t + 1) return s - 1;
    return -1;
  }

  // longest edge with deterministic tie-breaking
  std::pair<int, int> longest_edge_of(int t) const {
    const auto& tr = T[t];
    double best = -1;
    int ba = -1, bb = -1;
    for (int e = 0; e < 3; ++e) {
      int a = tr.v[e], b = tr.v[(e + 1) % 3];
      double len = std::norm(V[a] - V[b]);
      int lo = std::min(a, b), hi = std::max(a, b);
      int clo = std::min(ba, bb), chi = std::max(ba, bb);
      if (len > best * (1 + 1e-14) ||
          (std::abs(len - best) <= best * 1e-14 &&
           (lo > clo || (lo == clo && hi > chi)))) {
        best = len;
        ba = a;
        bb = b;
      }
    }
    return {ba, bb};
  }

  int split_point(int a, int b) {
    auto it = midpoint.find(ekey(a, b));
    if (it != midpoint.end()) return it->second;
    Complex m = 0.5 * (V[a] + V[b]);
    bool bnd = barc.count({std::min(a, b), std::max(a, b)}) > 0;
    if (bnd) m /= std::abs(m);  // snap to the unit circle
    int id = (int)V.size();
    V.push_back(m);
    bflag.push_back(bnd ? 1 : 0);
    midpoint[ekey(a, b)] = id;
    return id;
  }

  void bisect(int t0) {
    std::vector<int> stack{t0};
    int guard = 0;
    while (!stack.empty()) {
      if (++guard > 2000000) throw std::runtime_error("mesh: bisection did not terminate");
      int t = stack.back();
      if (!T[t].alive) {
        stack.pop_back();
        continue;
      }
      auto [a, b] = longest_edge_of(t);
      int n = neighbor(t, a, b);
      if (n >= 0) {
        auto [na, nb] = longest_edge_of(n);
        if (ekey(na, nb) != ekey(a, b)) {
          stack.push_back(n);
          continue;
        }
      }
      stack.pop_back();
      int m = split_point(a, b);
      auto split_one = [&](int tt) {
        int c = -1;
        for (int i = 0; i < 3; ++i)
          if (T[tt].v[i] != a && T[tt].v[i] != b) c = T[tt].v[i];
        kill_tri(tt);
        add_tri(c, a, m);
        add_tri(c, m, b);
      };
      split_one(t);
      if (n >= 0 && T[n].alive) split_one(n);
      auto bit = barc.find({std::min(a, b), std::max(a, b)});
      if (bit != barc.end()) {
        int arc = bit->second;
        barc.erase(bit);
        barc[{std::min(a, m), std::max(a, m)}] = arc;
        barc[{std::min(m, b), std::max(m, b)}] = arc;
      }
    }
  }
};

double smooth_bump(double t) {  // quintic: 1 at 0, 0 at 1, C^2
  if (t <= 0) return 1.0;
  if (t >= 1) return 0.0;
  double s = 1.0 - t;
  (void)s;
  return 1.0 - (10 * t * t * t - 15 * t * t * t * t + 6 * t * t * t * t * t);
}

}  // namespace

double Mesh::triangle_area(int t) const {
  const auto& tr = triangles[t];
  return tri_area(vertices[tr[0]], vertices[tr[1]], vertices[tr[2]]);
}

double Mesh::longest_edge(int t) const {
  const auto& tr = triangles[t];
  double m = 0;
  for (int e = 0; e < 3; ++e)
    m = std::max(m, std::abs(vertices[tr[e]] - vertices[tr[(e + 1) % 3]]));
  return m;
}

double Mesh::min_angle_deg() const {
  double mn = 180.0;
  for (const auto& tr : triangles) {
    for (int e = 0; e < 3; ++e) {
      Complex a = vertices[tr[e]], b = vertices[tr[(e + 1) % 3]], c = vertices[tr[(e + 2) % 3]];
      Complex u = b - a, v = c - a;
      double cosang = (u.real() * v.real() + u.imag() * v.imag()) / (std::abs(u) * std::abs(v));
      cosang = std::clamp(cosang, -1.0, 1.0);
      mn = std::min(mn, std::acos(cosang) * 180.0 / kPi);
    }
  }
  return mn;
}

std::vector<int> Mesh::vertex_star(int v) const {
  std::vector<int> out;
  for (int t = 0; t < num_triangles(); ++t)
    if (triangles[t][0] == v || triangles[t][1] == v || triangles[t][2] == v) out.push_back(t);
  return out;
}

Mesh build_mesh(const Divisor& d, double target_h, int grading_depth, const MeshOptions& opt) {
  if (target_h <= 0 || target_h > 0.8) throw std::invalid_argument("build_mesh: bad target_h");
  if (grading_depth < 0 || grading_depth > 40)
    throw std::invalid_argument("build_mesh: bad grading_depth");

  // Disk images of the punctures.
  std::vector<Complex> pdisk;
  for (const auto& p : d.punctures) pdisk.push_back(cayley(p.location));
  double mind = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pdisk.size(); ++i)
    for (std::size_t j = i + 1; j < pdisk.size(); ++j)
      mind = std::min(mind, std::abs(pdisk[i] - pdisk[j]));
  if (mind < 4.0 * target_h && opt.error_on_close_punctures)
    throw std::runtime_error("build_mesh: punctures closer than 4*target_h");

  // Boundary punctures in ascending real coordinate define the sigma arcs.
  auto bps = d.boundary_sorted();
  const int M = (int)bps.size();
  struct BNode {
    double theta;
    int arc_after;  // arc label of the segment starting here (for puncture nodes)
    bool is_puncture;
    int pidx;  // index into divisor.punctures
  };
  auto angle_of = [](Complex w) { return std::atan2(w.imag(), w.real()); };

  std::vector<Complex> points;       // input to Delaunay
  std::vector<char> bnd;             // boundary flag per point
  std::vector<int> pvert(d.size(), -1);

  // boundary nodes arc by arc
  std::map<std::pair<int, int>, int> arc_of_edge;  // filled after indices known
  std::vector<std::pair<int, int>> bedges;         // consecutive boundary point ids
  std::vector<int> bedge_arc;

  if (M == 0) {
    int n = std::max(8, (int)std::ceil(2 * kPi / target_h));
    int first = (int)points.size();
    for (int i = 0; i < n; ++i) {
      double th = 2 * kPi * i / n;
      points.push_back(Complex(std::cos(th), std::sin(th)));
      bnd.push_back(1);
    }
    for (int i = 0; i < n; ++i) {
      bedges.push_back({first + i, first + (i + 1) % n});
      bedge_arc.push_back(0);
    }
  } else {
    std::vector<double> th(M);
    std::vector<int> pidx(M);
    for (int l = 0; l < M; ++l) {
      th[l] = angle_of(cayley(bps[l]->location));
      for (std::size_t k = 0; k < d.size(); ++k)
        if (&d.punctures[k] == bps[l]) pidx[l] = (int)k;
    }
    std::vector<int> node_ids(M);
    std::vector<std::vector<int>> arc_nodes(M);
    for (int l = 0; l < M; ++l) {
      node_ids[l] = (int)points.size();
      points.push_back(cayley(bps[l]->location));
      bnd.push_back(1);
      pvert[pidx[l]] = node_ids[l];
    }
    for (int l = 0; l < M; ++l) {
      double t0 = th[l], t1 = th[(l + 1) % M];
      while (t1 <= t0) t1 += 2 * kPi;
      double span = t1 - t0;
      int n = std::max(1, (int)std::ceil(span / target_h));
      int prev = node_ids[l];
      for (int i = 1; i < n; ++i) {
        double t = t0 + span * i / n;
        int id = (int)points.size();
        points.push_back(Complex(std::cos(t), std::sin(t)));
        bnd.push_back(1);
        bedges.push_back({prev, id});
        bedge_arc.push_back(l);
        prev = id;
      }
      bedges.push_back({prev, node_ids[(l + 1) % M]});
      bedge_arc.push_back(l);
    }
  }

  // interior lattice (hex rows), with a deterministic sub-micro jitter to
  // break cocircular degeneracies
  double h = target_h;
  double rowh = h * std::sqrt(3.0) / 2.0;
  int jmax = (int)std::floor(1.0 / rowh) + 1;
  auto hash01 = [](int i, int j, int s) {
    std::uint32_t x = (std::uint32_t)(i * 73856093) ^ (std::uint32_t)(j * 19349663) ^
                      (std::uint32_t)(s * 83492791);
    x ^= x >> 13;
    x *= 0x85ebca6bu;
    x ^= x >> 16;
    return (double)x / 4294967296.0 - 0.5;
  };
  for (int j = -jmax; j <= jmax; ++j) {
    double y = j * rowh;
    double xoff = (j & 1) ? 0.5 * h : 0.0;
    int imax = (int)std::floor(1.0 / h) + 1;
    for (int i = -imax; i <= imax; ++i) {
      Complex p(i * h + xoff + 1e-5 * h * hash01(i, j, 1),
                y + 1e-5 * h * hash01(i, j, 2));
      if (std::abs(p) > 1.0 - 0.72 * h) continue;
      bool skip = false;
      for (auto& q : pdisk)
        if (std::abs(p - q) < 0.6 * h) skip = true;
      if (skip) continue;
      points.push_back(p);
      bnd.push_back(0);
    }
  }
  // bulk puncture images as exact vertices
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d.punctures[k].kind == PunctureKind::Bulk) {
      pvert[k] = (int)points.size();
      points.push_back(pdisk[k]);
      bnd.push_back(0);
    }
  }

  Delaunay dl;
  dl.run(points);

  DynMesh dm;
  dm.V = points;
  dm.bflag = bnd;
  const int np = (int)points.size();
  for (const auto& t : dl.tris) {
    if (!t.alive) continue;
    if (t.v[0] >= np || t.v[1] >= np || t.v[2] >= np) continue;  // touches super-triangle
    dm.add_tri(t.v[0], t.v[1], t.v[2]);
  }
  for (std::size_t e = 0; e < bedges.size(); ++e) {
    auto [a, b] = bedges[e];
    dm.barc[{std::min(a, b), std::max(a, b)}] = bedge_arc[e];
  }

  // geometric grading toward the punctures: local size ~ h * clamp(r/R0, 2^-depth, 1)
  std::vector<double> R0(d.size(), std::min(opt.grading_r0, 1.0));
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (std::size_t j = 0; j < d.size(); ++j)
      if (j != k) R0[k] = std::min(R0[k], 0.45 * std::abs(pdisk[k] - pdisk[j]));
  }
  double floor_frac = std::pow(0.5, grading_depth);
  auto target_size = [&](Complex x) {
    double s = 1.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      double r = std::abs(x - pdisk[k]) / R0[k];
      s = std::min(s, std::clamp(r, floor_frac, 1.0));
    }
    return h * s;
  };
  if (!d.empty() && grading_depth > 0) {
    for (int pass = 0; pass < 48 * (grading_depth + 2); ++pass) {
      std::vector<int> marked;
      for (int t = 0; t < (int)dm.T.size(); ++t) {
        if (!dm.T[t].alive) continue;
        double ts = std::min({target_size(dm.V[dm.T[t].v[0]]), target_size(dm.V[dm.T[t].v[1]]),
                              target_size(dm.V[dm.T[t].v[2]])});
        auto [a, b] = dm.longest_edge_of(t);
        if (std::abs(dm.V[a] - dm.V[b]) > 1.3 * ts) marked.push_back(t);
      }
      if (marked.empty()) break;
      for (int t : marked)
        if (dm.T[t].alive) dm.bisect(t);
    }
  }

  // compact into the public structure
  Mesh m;
  m.vertices = dm.V;
  m.boundary_vertex = dm.bflag;
  for (const auto& t : dm.T)
    if (t.alive) m.triangles.push_back({t.v[0], t.v[1], t.v[2]});
  for (auto& [e, arc] : dm.barc) {
    // orient CCW: along the circle the CCW successor of a has greater angle
    int a = e.first, b = e.second;
    Complex va = dm.V[a], vb = dm.V[b];
    double cross = va.real() * vb.imag() - va.imag() * vb.real();
    if (cross < 0) std::swap(a, b);
    m.boundary_edges.push_back({a, b, arc});
  }
  m.puncture_vertex = pvert;
  m.puncture_disk = pdisk;
  m.grading_radius.assign(R0.begin(), R0.end());
  m.num_arcs = std::max(1, M);
  m.target_h = target_h;
  m.grading_depth = grading_depth;
  for (std::size_t k = 0; k < d.size(); ++k)
    if (pvert[k] < 0) throw std::runtime_error("build_mesh: puncture vertex missing");
  return m;
}

Mesh morph_mesh(const Mesh& m, int k, Complex new_halfplane_location) {
  if (k < 0 || k >= (int)m.puncture_vertex.size())
    throw std::invalid_argument("morph_mesh: bad puncture index");
  Mesh out = m;
  Complex p = m.puncture_disk[k];
  Complex q = cayley(new_halfplane_location);
  double R = m.grading_radius.empty() ? 0.3 : 0.8 * m.grading_radius[k];
  bool boundary = std::abs(std::abs(p) - 1.0) < 1e-12;
  if (boundary) {
    double dth = std::atan2(q.imag(), q.real()) - std::atan2(p.imag(), p.real());
    dth = std::atan2(std::sin(dth), std::cos(dth));
    if (std::abs(dth) > 0.5 * R)
      throw std::invalid_argument("morph_mesh: shift too large for the morph radius");
    for (int v = 0; v < out.num_vertices(); ++v) {
      double t = std::abs(m.vertices[v] - p) / R;
      double w = smooth_bump(t);
      if (w == 0) continue;
      double a = dth * w;
      out.vertices[v] = m.vertices[v] * Complex(std::cos(a), std::sin(a));
    }
  } else {
    Complex dvec = q - p;
    if (std::abs(dvec) > 0.4 * R)
      throw std::invalid_argument("morph_mesh: shift too large for the morph radius");
    for (int v = 0; v < out.num_vertices(); ++v) {
      double t = std::abs(m.vertices[v] - p) / R;
      double w = smooth_bump(t);
      if (w == 0) continue;
      out.vertices[v] = m.vertices[v] + dvec * w;
    }
  }
  out.puncture_disk[k] = q;
  out.vertices[m.puncture_vertex[k]] = q;  // exact
  return out;
}

void write_mesh(std::ostream& os, const Mesh& m) {
  os.precision(17);
  os << "liouville-mesh 1\n";
  os << "h " << m.target_h << " depth " << m.grading_depth << " arcs " << m.num_arcs << "\n";
  os << "vertices " << m.num_vertices() << "\n";
  for (int i = 0; i < m.num_vertices(); ++i)
    os << m.vertices[i].real() << " " << m.vertices[i].imag() << " "
       << int(m.boundary_vertex[i]) << "\n";
  os << "triangles " << m.num_triangles() << "\n";
  for (const auto& t : m.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
  os << "boundary_edges " << m.boundary_edges.size() << "\n";
  for (const auto& e : m.boundary_edges) os << e.a << " " << e.b << " " << e.arc << "\n";
  os << "punctures " << m.puncture_vertex.size() << "\n";
  for (std::size_t k = 0; k < m.puncture_vertex.size(); ++k)
    os << m.puncture_vertex[k] << " " << m.puncture_disk[k].real() << " "
       << m.puncture_disk[k].imag() << " " << m.grading_radius[k] << "\n";
}

Mesh read_mesh(std::istream& is) {
  std::string tag;
  int version;
  is >> tag >> version;
  if (tag != "liouville-mesh" || version != 1)
    throw std::runtime_error("read_mesh: bad header");
  Mesh m;
  std::string key;
  int n;
  is >> key >> m.target_h >> key >> m.grading_depth >> key >> m.num_arcs;
  is >> key >> n;
  m.vertices.resize(n);
  m.boundary_vertex.resize(n);
  for (int i = 0; i < n; ++i) {
    double x, y;
    int f;
    is >> x >> y >> f;
    m.vertices[i] = {x, y};
    m.boundary_vertex[i] = (char)f;
  }
  is >> key >> n;
  m.triangles.resize(n);
  for (auto& t : m.triangles) is >> t[0] >> t[1] >> t[2];
  is >> key >> n;
  m.boundary_edges.resize(n);
  for (auto& e : m.boundary_edges) is >> e.a >> e.b >> e.arc;
  is >> key >> n;
  m.puncture_vertex.resize(n);
  m.puncture_disk.resize(n);
  m.grading_radius.resize(n);
  for (int k = 0; k < n; ++k) {
    double x, y;
    is >> m.puncture_vertex[k] >> x >> y >> m.grading_radius[k];
    m.puncture_disk[k] = {x, y};
  }
  if (!is) throw std::runtime_error("read_mesh: truncated file");
  return m;
}

}  // namespace liouville
