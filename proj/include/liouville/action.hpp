#pragma once

#include "liouville/solver.hpp"

namespace liouville {

/// The classical Liouville action split S = I(varphi) + G(z, a). The additive
/// constant depending only on w0 is excluded throughout; every downstream
/// identity involves differences or derivatives of S only.
struct ActionReport {
  double I_value = 0;
  double G_interaction = 0;
  double S_total = 0;
  double quadrature_error = 0;
  bool background_constant_excluded = true;
  // breakdown of I
  double dirichlet = 0, bulk_exp = 0, bdry_exp = 0, mean_term = 0;
};

/// G(z,a) = -2 sum_{k != l} a_k a_l G0(z_k, z_l) - 2 sum_k a_k^2 W(z_k)
/// over the half-coefficient convention; boundary punctures use the boundary
/// diagonal constant.
double interaction_term(const Divisor& d);

ActionReport classical_action(const Solution& sol);

/// S_{delta,eps}: the action of the masked problem at its own minimizer.
ActionReport regularized_action(const Solution& sol_reg);

struct ActionDerivative {
  Complex value;          // insertion-normalized derivative (the weak-derivative
                          // object dual to the descendants); boundary: real part
  Complex value_raw;      // plain derivative of S_total
  double error_estimate;  // Richardson residual
  double step_used;
};

/// Central differences of S in the position of puncture k with re-solves on
/// morphed meshes (warm-started), Richardson-extrapolated over {h, h/2}.
/// `value` subtracts the closed-form derivative of the insertion conformal
/// factors, 4 delta_k w0(x_k), which anchors the action to flat-normalized
/// insertions; this is the object whose gradient matches -2 c_k.
ActionDerivative action_derivative_fd(const Solution& base, int k, const SolverOptions& opt,
                                      double rel_step = 1e-3, int threads = 2);

}  // namespace liouville
