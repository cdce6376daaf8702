#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "liouville/fem.hpp"
#include "liouville/quadrature.hpp"

namespace liouville {

/// Smooth curvature masks of the regularized problem: Lambda vanishes within
/// eps (g0-geodesic) of every puncture and within delta of the boundary;
/// sigma vanishes within eps of every puncture. Transition band 0.1 * radius.
struct RegMask {
  double delta = 0.0;
  double eps = 0.0;
  double band_fraction = 0.1;  // transition band width as a fraction of the radius
};

struct ProblemSpec {
  Divisor divisor;
  double Lambda = 2.0;
  std::vector<double> sigma_arcs;  // one per boundary arc (>= 1 entries)
  std::optional<RegMask> reg;

  double sigma(int arc) const;
  int num_arcs() const;
  void validate_or_throw() const;
};

/// Reference configuration used across tests: bulk -3/4 at i, boundary -3/4
/// at 0 and 1, Lambda = 2, sigma = 1 on both arcs.
ProblemSpec reference_spec();

struct SolverOptions {
  double target_h = 0.08;
  int grading_depth = 12;
  double tol = 1e-10;
  int max_iter = 80;
  bool use_direct_solver = true;  // false: diagonally preconditioned CG
  int fe_order = 2;
  QuadParams quad;
  MeshOptions mesh;
};

/// Immutable discretization bundle (mesh, space, operators, quadrature).
struct Disc {
  Mesh mesh;
  Divisor divisor;  // owned copy; the quadrature keeps a pointer into it
  FeSpace space;
  std::unique_ptr<Locator> locator;
  std::unique_ptr<FieldEval> eval;
  DiscreteOperators ops;
  std::unique_ptr<SingularQuadrature> quad;
  double g0_area = 0.0;  // 1' M0 1
  Vec m0;                // M0 * 1

  static std::shared_ptr<const Disc> build(const Divisor& d, const SolverOptions& opt);
  static std::shared_ptr<const Disc> build_from_mesh(Mesh mesh, const Divisor& d,
                                                     const SolverOptions& opt);
};

/// Quadrature tables with the problem data folded in:
/// bulk A = W0 * Lambda * e^H * mask, boundary B = W0 * sigma * e^{H/2} * mask.
struct ExpTables {
  struct Pt {
    int elem;
    std::array<double, 6> shape;
    double A;
    Complex x;
    double t;      // boundary only
    int arc;       // boundary only
    int patch = -1;
  };
  std::vector<Pt> bulk, bdry;
  std::vector<Pt> bulk_lo, bdry_lo;
};

struct Solution {
  std::shared_ptr<const Disc> disc;
  ProblemSpec spec;
  std::shared_ptr<const ExpTables> tables;
  Vec varphi;             // regular part coefficients
  double mean_c = 0.0;    // m_{g0}(varphi)
  int newton_iterations = 0;
  double gradient_norm = 0.0;
  double energy_value = 0.0;      // I(varphi) incl. interactionless terms
  double quadrature_error = 0.0;  // nested-rule estimate of the solved masses
  double bulk_mass = 0.0;         // int Lambda e^Phi d^2x (flat), hi rule
  double bdry_mass = 0.0;         // int sigma e^{Phi/2} dt
  bool overflow_flag = false;
  bool used_fallback_solver = false;

  // field evaluation (w: disk point, x: half-plane point)
  double varphi_at(Complex w) const;
  Eigen::Vector2d grad_varphi_at(Complex w) const;
  double Phi(Complex x) const;                   // varphi + H + 2 w0
  double Phi_sub(Complex x, int k) const;        // log-subtracted at puncture k
  Complex dPhi_sub(Complex x, int k) const;      // FE gradient + closed forms
  double gauss_bonnet_defect() const;            // |(1/4pi)B + (1/2pi)S + chi|
};

/// The discrete Liouville energy and its derivatives. Custom density hooks
/// replace Lambda e^H (bulk) and sigma e^{H/2} (boundary) for the
/// manufactured-solution path.
struct EnergyModel {
  std::shared_ptr<const Disc> disc;
  ProblemSpec spec;
  std::shared_ptr<const ExpTables> tables;
  double chi;

  double energy(const Vec& u, bool* overflow = nullptr) const;
  Vec gradient(const Vec& u) const;
  SpMat hessian(const Vec& u) const;
};

std::shared_ptr<const ExpTables> build_tables(
    const Disc& disc, const ProblemSpec& spec,
    const std::function<double(Complex w, Complex x)>* bulk_density = nullptr,
    const std::function<double(Complex w, double t, int arc)>* bdry_density = nullptr);

/// The singular part H as a discrete field (nodal interpolation) plus its
/// exact log decomposition; evaluation at a puncture returns the smooth part.
struct SingularPart {
  const Divisor* divisor;
  Vec nodal;  // interpolated H on the FE dofs (infinite at puncture dofs -> clamped)
  double log_coefficient(int k) const;
  double smooth_at(int k, Complex x) const;
};
SingularPart singular_part(const Disc& disc, const Divisor& d);

Solution solve(const ProblemSpec& spec, const SolverOptions& opt);
Solution solve_on_disc(std::shared_ptr<const Disc> disc, const ProblemSpec& spec,
                       const SolverOptions& opt, const Vec* warm_start = nullptr);

struct ResidualReport {
  double interior_norm;
  double boundary_norm;
};
ResidualReport residual_check(const Solution& sol);

/// Max deviation of Phi = H + 2w0 + c - (1/2pi) int G0 Lambda e^Phi
/// - (1/pi) int G0 sigma e^{Phi/2} over random probe points.
double consistency_identity(const Solution& sol, int n_probes, std::uint64_t seed);

struct Manufactured {
  std::function<double(Complex)> phi_hat;        // disk point -> value
  std::function<double(Complex)> bulk_density;   // W0 coefficient: Lambda_hat e^{H}
  std::function<double(Complex, int)> bdry_density;
  std::string description;
};
/// Picks a smooth target field whose induced curvatures satisfy the convexity
/// hypotheses (Lambda_hat >= 0, sigma_hat >= 0); rejects bad drafts.
Manufactured manufactured_oracle(const Divisor& d, std::uint64_t seed);
Solution solve_manufactured(const Manufactured& mf, const Divisor& d,
                            const SolverOptions& opt);

/// Rotates a whole problem by the boundary-preserving isometry; sigma arcs
/// are relabeled to follow their punctures.
ProblemSpec transform_spec(const ProblemSpec& spec, double theta);

/// <f>_{z,a} pairing in the solved metric; f_bulk takes half-plane x,
/// f_bdry takes boundary t (t_inf flag for the point at infinity).
double weighted_pairing(const Solution& sol, const std::function<double(Complex)>& f_bulk,
                        const std::function<double(double, bool)>& f_bdry);

}  // namespace liouville
