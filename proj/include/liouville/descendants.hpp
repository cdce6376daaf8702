#pragma once

#include <array>
#include <functional>
#include <vector>

#include "liouville/action.hpp"

namespace liouville {

/// Weighted integrals of rational kernels against the solved measures:
///   itot[f] = (1/4pi) int (f(x) + f(xbar)) Lambda e^Phi d^2x
///           + (1/2pi) int f(t) sigma e^{Phi/2} dt,
/// the half-plane integrals taken over the quadrature tables of the solution.
/// Kernels with a pole at a puncture are covered by the symmetric patch nodes
/// (structural principal value); poles elsewhere need a probe (below).
class IntegralEngine {
 public:
  explicit IntegralEngine(const Solution& sol);

  using Kernel = std::function<Complex(Complex)>;

  Complex itot(const Kernel& f, bool lo = false) const;

  /// Same integral but excluding the patch of puncture `skip` entirely and
  /// instead covering the annulus [r, R_patch] around it (hard inner cut in
  /// half-plane metric). Used by the boundary descendant's I_reg.
  Complex itot_excluding_ball(const Kernel& f, int skip_puncture, double r,
                              bool lo = false) const;

  /// Probe for kernels singular at a regular point z (bulk).
  struct Probe {
    SingularQuadrature::ProbeQuad pq;
    std::vector<double> dens_band, dens_patch;  // Lambda e^Phi weights
    Complex z;
  };
  Probe make_probe(Complex z_half, double R_disk) const;
  Complex itot_probe(const Probe& p, const Kernel& f, bool lo = false) const;

  /// Gauss-Bonnet bracket 2 chi + (1/2pi) int Lambda e^Phi + (1/pi) int sigma e^{Phi/2}
  /// multiplying the dw0 terms of the derivative formulas (vanishes in the
  /// continuum; kept for defect-robustness).
  double gb_bracket() const { return gb_; }

  const Solution& solution() const { return *sol_; }

 private:
  const Solution* sol_;
  std::vector<double> expu_bulk_, expu_bdry_, expu_bulk_lo_, expu_bdry_lo_;
  double gb_ = 0;
};

struct DescendantEntry {
  Complex x;
  double c = 0;          // doubled-list weight (a_k bulk/conjugate, b_l boundary)
  int source = -1;       // divisor puncture index
  bool conjugate = false;
  bool boundary = false;
  Complex l1{0, 0};
  Complex accessory{0, 0};  // c_k = l1 / 2
  double delta = 0;         // -c (1 + c/2)
  double l1_error = 0;      // nested-rule estimate
  double r_used = 0;        // boundary entries: evaluation radius
  double r_stability = 0;   // |value(r) - value(r/2)|
};

struct DescendantReport {
  std::vector<DescendantEntry> entries;
  double quadrature_error = 0;
};

/// L_{-1} at bulk puncture k through the doubled-list sum + itot kernel.
Complex l1_bulk(const IntegralEngine& eng, int k, double* err = nullptr);

/// Direct form -2 a_k dPhi^{(k)}(z_k) via ring-averaged FE differentiation.
Complex l1_bulk_direct(const Solution& sol, int k, double* err = nullptr);

/// Boundary descendant through its defining limit: masked re-solves on an
/// eps schedule anchored at r, with the sigma-jump counterterm, extrapolated
/// at the corner-harmonic rate eps^{2(1+b)}. Converges slowly (the rate is
/// eps^{1/2} at b = -3/4); used as the r-independence diagnostic.
double l1_boundary(const IntegralEngine& eng, int l, double r, const SolverOptions& opt,
                   double* err = nullptr);

/// Accessory report. Bulk entries come from the doubled-list sum + itot
/// kernels (principal values on the patches); boundary residues are read off
/// the stress tensor: with the double-pole weights known, the simple-pole
/// coefficients are a small linear fit of the rational model to the direct
/// tensor at safe probes.
DescendantReport accessory_parameters(const IntegralEngine& eng);

/// Normalized global Ward residuals for n = 0, 1, 2.
std::array<double, 3> global_ward_residuals(const DescendantReport& rep);
/// Raw (unnormalized) Ward sums, used for the far-field decay bound.
std::array<double, 3> global_ward_sums(const DescendantReport& rep);

struct StressTensorModel {
  struct Pole {
    Complex x;
    double delta;
    Complex residue;
  };
  std::vector<Pole> poles;
  Complex evaluate(Complex z) const;
};
StressTensorModel stress_tensor(const DescendantReport& rep);

/// T(z) = d^2 Phi - (d Phi)^2 / 2 evaluated through the integral
/// representation of the field derivatives at a regular bulk point.
Complex stress_tensor_direct(const IntegralEngine& eng, Complex z, double* err = nullptr);

/// First and second Wirtinger derivatives of Phi at a regular bulk point.
void phi_derivatives(const IntegralEngine& eng, Complex z, Complex* d1, Complex* d2,
                     bool lo = false);

/// Local Ward value at doubled-list entry k from the report.
Complex l2_ward(const DescendantReport& rep, int entry);

/// (1 - a_k) d^2 Phi^{(k)}(z_k) - (d Phi^{(k)}(z_k))^2 / 2 at a bulk puncture
/// via the integral representation (patch principal values).
Complex l2_bulk_direct(const IntegralEngine& eng, int k, double* err = nullptr);

struct HemBoundaryProbe {
  double t;
  int arc;
  double res_half_quarter;  // (d_t^2 + T/2) e^{-Phi/4} - (sigma^2 - Lambda/2)/4 e^{3Phi/4}
  double res_two;           // (d_t^2 + 2T) e^{-Phi/4} - (sigma^2 - Lambda/2) e^{3Phi/4}
  double scale;
};
struct HemReport {
  double bulk_residual = 0;  // pipeline identity, zero in exact arithmetic
  double bulk_scale = 0;
  std::vector<HemBoundaryProbe> boundary;
  bool half_quarter_convention_wins = true;
  double max_half_quarter_normalized = 0;
};
HemReport hem_residuals(const IntegralEngine& eng, const DescendantReport& rep,
                        int probes_per_arc = 3);

struct L2BoundaryResult {
  double value = 0;        // extrapolated limit
  double uncertainty = 0;  // schedule spread
  bool schedule_too_coarse = false;
  std::vector<double> sequence;
};
/// Regularized-schedule evaluation of the boundary level-2 descendant with
/// the remainder term removed; expensive (one masked solve per step).
L2BoundaryResult l2_boundary_direct(const ProblemSpec& spec, int l,
                                    const std::vector<double>& schedule,
                                    const SolverOptions& opt, double r_tail = 0.25);

}  // namespace liouville
