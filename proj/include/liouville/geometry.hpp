#pragma once

#include <complex>
#include <string>
#include <vector>

namespace liouville {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline const Complex kI{0.0, 1.0};

// Background metric of the half-plane model: g0 = 4|dx|^2 / (1+|x|^2)^2,
// the hemisphere metric in stereographic coordinates. Scalar curvature 2,
// geodesic boundary, total area 2*pi, boundary length 2*pi.

/// w0(x) with e^{2 w0} the conformal factor of g0.
inline double conformal_exponent(Complex x) {
  return std::log(2.0) - std::log1p(std::norm(x));
}

inline double metric_factor(Complex x) {  // e^{2 w0}
  double s = 1.0 + std::norm(x);
  return 4.0 / (s * s);
}

/// Wirtinger derivative of w0: d/dx w0 = -conj(x)/(1+|x|^2).
inline Complex dw0(Complex x) { return -std::conj(x) / (1.0 + std::norm(x)); }

/// Second Wirtinger derivative of w0.
inline Complex d2w0(Complex x) {
  double s = 1.0 + std::norm(x);
  Complex cx = std::conj(x);
  return cx * cx / (s * s);
}

/// Geodesic distance of g0 (great-circle arc of the unit hemisphere).
double geodesic_distance(Complex x, Complex y);

/// Neumann Green's function of g0 in the half-plane closed form:
/// G0(x,y) = ln 1/(|x-y||x-conj(y)|) - (w0(x)+w0(y)+1). Throws on x == y.
/// Note the additive normalization: this kernel integrates to -4 pi ln 2
/// against dv_{g0}; green_mean_zero is the mean-zero representative.
double green(Complex x, Complex y);

/// Additive shift making the kernel mean-zero: int G dv_{g0} = 0.
inline constexpr double kGreenMeanShift = 2.0 * 0.693147180559945309417;  // 2 ln 2

inline double green_mean_zero(Complex x, Complex y) { return green(x, y) + kGreenMeanShift; }
inline double green_mean_zero_at_infinity(Complex y);

/// Wirtinger derivative of G0 in its first argument.
Complex green_dx(Complex x, Complex y);

/// Diagonal regularization: G0(x,y) + log d_{g0}(x,y) -> W(y) for bulk y.
double diagonal_w_bulk(Complex y);

/// Boundary variant: G0(x,y) + 2 log d_{g0}(x,y) -> W(y), y real. Constant.
double diagonal_w_boundary(Complex y);

/// Dispatches on im(y) == 0.
double diagonal_w(Complex y);

// ---- Cayley model: the closed unit disk as the computational domain ----
// w = (x - i)/(x + i) is an isometry of (H, g0) onto (D, 4|dw|^2/(1+|w|^2)^2).

inline Complex cayley(Complex x) { return (x - kI) / (x + kI); }
inline Complex cayley_inv(Complex w) { return kI * (1.0 + w) / (1.0 - w); }
inline Complex cayley_dwdx(Complex x) { Complex d = x + kI; return 2.0 * kI / (d * d); }
inline Complex cayley_dxdw(Complex w) { Complex d = 1.0 - w; return 2.0 * kI / (d * d); }

/// Disk-side conformal exponent: e^{2 what(w)} |dw|^2 = pullback of g0.
inline double disk_metric_exponent(Complex w) {
  return std::log(2.0) - std::log1p(std::norm(w));
}
inline double disk_metric_factor(Complex w) {
  double s = 1.0 + std::norm(w);
  return 4.0 / (s * s);
}

/// Distance of x to the boundary of the model in g0 (distance to the equator).
inline double boundary_distance(Complex x) {
  return std::abs(kPi / 2.0 - geodesic_distance(x, kI));
}

/// Rotation isometry of (H, g0) preserving the boundary:
/// x -> (cos t * x - sin t)/(sin t * x + cos t). Throws at the Mobius pole.
Complex half_plane_isometry(double theta, Complex x);

// ---- Divisors ----

enum class PunctureKind { Bulk, Boundary };

struct Puncture {
  PunctureKind kind{PunctureKind::Bulk};
  Complex location{0.0, 1.0};
  double weight{0.0};  // a_k (bulk) or b_l (boundary), > -1

  /// Coefficient entering H and the interaction term: a_k or b_l/2.
  double half_coefficient() const {
    return kind == PunctureKind::Bulk ? weight : 0.5 * weight;
  }
  /// Coefficient of ln|x - z| in the full field Phi near the puncture:
  /// 2 a_k at bulk punctures, 2 b_l at boundary punctures.
  double log_coefficient() const {
    return kind == PunctureKind::Bulk ? 2.0 * weight : 2.0 * weight;
  }
};

struct Divisor {
  std::vector<Puncture> punctures;

  /// Singular Euler characteristic chi(Sigma, D) = 1 + sum a_k + 1/2 sum b_l.
  double chi() const;

  /// All violated constraints; empty when admissible for the solver.
  std::vector<std::string> validate() const;

  bool empty() const { return punctures.empty(); }
  std::size_t size() const { return punctures.size(); }

  double min_pair_distance() const;  // flat half-plane metric, +inf if < 2 points

  std::vector<const Puncture*> bulk() const;
  std::vector<const Puncture*> boundary_sorted() const;  // ascending real coordinate
};

/// Entry of the doubled list x = {z_k} u {conj z_k} u {s_l} with weights
/// c = a_k, a_k, b_l. `source` indexes into divisor.punctures.
struct DoubledEntry {
  Complex x;
  double c{};
  int source{-1};
  bool conjugate{false};
  bool boundary{false};
};

std::vector<DoubledEntry> doubled_list(const Divisor& d);

// ---- the singular conformal factor H = -2 sum a_k G0(., z_k) ----
// (boundary punctures enter with the half coefficient b_l/2)

double green_at_infinity(Complex y);  // limit of G0(x, y) as x -> infinity

inline double green_mean_zero_at_infinity(Complex y) {
  return green_at_infinity(y) + kGreenMeanShift;
}

/// H at x; diverges logarithmically at the punctures.
double h_field(const Divisor& d, Complex x);
double h_field_at_infinity(const Divisor& d);

/// H with the local log singularity of puncture k removed:
/// H - logcoef_k * ln|x - z_k|, smooth near z_k.
double h_smooth(const Divisor& d, int k, Complex x);
Complex dh_field(const Divisor& d, Complex x);          // Wirtinger, away from punctures
Complex dh_smooth(const Divisor& d, int k, Complex x);
Complex d2h_smooth(const Divisor& d, int k, Complex x);
Complex green_dxx(Complex x, Complex y);

}  // namespace liouville
