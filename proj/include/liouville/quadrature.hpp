#pragma once

#include <array>
#include <functional>
#include <vector>

#include "liouville/fem.hpp"
#include "liouville/geometry.hpp"

namespace liouville {

struct GaussRule {
  std::vector<double> x, w;  // nodes and weights on [0,1]
};

/// Gauss-Legendre on [0,1].
GaussRule gauss_legendre(int n);

/// Gauss-Jacobi on [0,1] for the weight t^beta, beta > -1:
/// int_0^1 t^beta f(t) dt = sum w_i f(x_i), exact for f polynomial < 2n.
GaussRule gauss_jacobi01(int n, double beta);

/// Triangle rules in barycentric (l1, l2) with weights summing to 1/2.
struct TriQuad {
  struct Pt {
    double l1, l2, w;
  };
  std::vector<Pt> pts;
};
TriQuad tri_midedge_rule();          // exact degree 2
TriQuad duffy_rule(int n);           // tensor Duffy, exact degree >= 2n - 2

// ---- singular quadrature bound to a mesh, space and divisor ----

/// One bulk quadrature point. W0 is the g0-volume weight: for any density F,
/// int F dv_{g0} = sum W0 * F(point). Integrals with the flat half-plane
/// measure use the same points via F e^{2 w0} = density. EH caches e^{H}.
struct BulkQP {
  Complex w;                     // disk coordinates
  Complex x;                     // half-plane coordinates
  int elem;
  std::array<double, 6> shape;
  double W0;
  double EH;
  int patch = -1;                // index of the originating puncture patch
};

/// Boundary quadrature point; W0 is the g0-length weight. t_inf marks the
/// node at the image of infinity. EH2 caches e^{H/2}.
struct BdryQP {
  Complex w;
  double t;
  bool t_inf;
  int elem;
  std::array<double, 6> shape;
  double W0;
  double EH2;
  int arc;
  int patch = -1;
};

struct QuadratureSet {
  std::vector<BulkQP> bulk;
  std::vector<BdryQP> bdry;
};

struct PatchInfo {
  int pidx;          // divisor index
  bool boundary;
  Complex center_disk;
  Complex z_half;    // half-plane location
  double z_real;     // real coordinate (boundary punctures)
  double bulk_exponent;   // r^{2a_k} (bulk) or r^{2b_l} (boundary)
  double line_exponent;   // r^{b_l} boundary line
  double R;          // patch radius in the half-plane metric (all patches are
                     // polar around z_half so kernel principal values cancel)
};

struct QuadParams {
  int far_n = 3;       // Duffy order for far-field elements
  int n_r = 28;        // radial Jacobi nodes per patch
  int n_theta = 48;    // angular nodes (full circle)
  int bdry_gl = 6;     // nodes per boundary edge
  int n_r_line = 24;   // boundary line patch nodes
};

/// Smooth radial cutoff: 1 on [0, 1/2], 0 on [1, inf), quintic in between.
double patch_cutoff(double t);

/// The solver/action/descendant quadrature: puncture patches with Gauss-Jacobi
/// radial rules and symmetric angular nodes, plus far-field element rules on
/// the cutoff complement. `hi` is the working set, `lo` drives error
/// estimates via nested-rule differences.
class SingularQuadrature {
 public:
  SingularQuadrature(const FeSpace& space, const Locator& loc, const Divisor& d,
                     const QuadParams& params = {});

  const QuadratureSet& hi() const { return hi_; }
  const QuadratureSet& lo() const { return lo_; }
  /// Patch variants for integrands without the registered singular factor
  /// (bare smooth or logarithmic densities).
  const QuadratureSet& hi_smooth() const { return hi_smooth_; }
  const QuadratureSet& lo_smooth() const { return lo_smooth_; }
  const std::vector<PatchInfo>& patches() const { return patches_; }
  const Divisor& divisor() const { return *div_; }

  /// Cutoff complement at a bulk (disk) point: prod over patches of (1 - chi).
  double far_mask_bulk(Complex w, Complex x) const;
  double far_mask_bdry(double t) const;

  /// int F dv_{g0} with F sampled on a point set (hi or lo).
  template <class F>
  double integrate_bulk(const QuadratureSet& qs, F&& f) const {
    double s = 0;
    for (const auto& q : qs.bulk) s += q.W0 * f(q);
    return s;
  }
  template <class F>
  double integrate_bdry(const QuadratureSet& qs, F&& f) const {
    double s = 0;
    for (const auto& q : qs.bdry) s += q.W0 * f(q);
    return s;
  }

  /// Build an isolated polar patch around a probe point (away from punctures)
  /// with symmetric angular nodes; used for principal-value kernels at probes.
  /// The returned points carry the probe cutoff; combine with far points
  /// multiplied by probe_mask.
  std::vector<BulkQP> probe_patch(Complex probe_half, double R_disk, int n_panels,
                                  int n_theta) const;
  double probe_mask(Complex w, Complex probe_disk, double R_disk) const;

  /// Probe quadrature with the far-field band re-integrated on subdivided
  /// elements, so the probe cutoff is fully resolved:
  ///   integral = sum over far table skipping replaced elements
  ///            + sum over band + sum over patch.
  struct ProbeQuad {
    std::vector<BulkQP> patch;  // probe cutoff folded into W0
    std::vector<BulkQP> band;   // (1 - chi_probe) * far_mask folded into W0
    std::vector<char> replaced_elem;
    Complex probe_disk;
    double R;
  };
  ProbeQuad make_probe_quad(Complex probe_half, double R_disk, int n_panels, int n_theta,
                            int subdiv = 2) const;

 private:
  void build_set(QuadratureSet& qs, const QuadParams& p, bool smooth) const;
  void fill_point(BulkQP& q) const;

  const FeSpace* space_;
  const Locator* loc_;
  const Divisor* div_;
  QuadParams params_;
  std::vector<PatchInfo> patches_;
  QuadratureSet hi_, lo_, hi_smooth_, lo_smooth_;
};

/// Physical quadrature for one element with an r^beta singularity anchored at
/// a vertex; weights apply to the full integrand.
struct PhysQuad {
  std::vector<Complex> pts;
  std::vector<double> w;
};
PhysQuad duffy_singular_rule(const Mesh& m, int tri, int local_vertex, double beta, int n);

}  // namespace liouville
