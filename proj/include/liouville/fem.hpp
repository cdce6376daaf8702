#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "liouville/mesh.hpp"

namespace liouville {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Continuous Lagrange space of order 1 or 2 on a disk mesh.
struct FeSpace {
  const Mesh* mesh = nullptr;
  int order = 2;
  int n_dofs = 0;
  int dofs_per_elem = 6;                        // 3 for order 1
  std::vector<std::array<int, 6>> elem_dofs;    // vertex dofs then edge dofs
  std::vector<Complex> dof_point;
  std::vector<char> dof_on_boundary;
  // per boundary edge: adjacent element and the local parametrization data
  struct BTrace {
    int elem;
    int a, b;  // vertex dofs, CCW
    int arc;
    double theta_a, theta_b;  // angles, theta_b > theta_a
  };
  std::vector<BTrace> btrace;

  static FeSpace build(const Mesh& m, int order);
};

/// Reference shape values (and derivatives) at barycentric (l0, l1, l2).
void shape_values(int order, double l1, double l2, double* N);
void shape_gradients_ref(int order, double l1, double l2, double (*dN)[2]);

/// Per-element affine geometry.
struct ElemGeom {
  Complex a;
  Eigen::Matrix2d J, Jinv;  // x = a + J * (xi, eta)
  double area2;             // |det J| = 2*area
};
ElemGeom elem_geom(const Mesh& m, int t);

/// Point location with support for slight extrapolation outside the polygon
/// (boundary quadrature nodes on the circular arc).
class Locator {
 public:
  explicit Locator(const Mesh& m);
  /// Returns element index and barycentric coordinates; tol is the allowed
  /// barycentric undershoot. Throws std::domain_error when nothing is close.
  int locate(Complex p, std::array<double, 3>& bary, double tol = 0.08) const;

 private:
  const Mesh* mesh_;
  double cell_;
  int n_;
  std::vector<std::vector<int>> cells_;
  int cell_index(double x, double y) const;
};

/// Evaluation of FE coefficient vectors.
class FieldEval {
 public:
  FieldEval(const FeSpace& space, const Locator& loc) : space_(&space), loc_(&loc) {}

  double value(const Vec& u, Complex w) const;
  /// Gradient in disk coordinates (d/dw1, d/dw2).
  Eigen::Vector2d gradient(const Vec& u, Complex w) const;
  /// Hessian in disk coordinates (piecewise constant for order 2).
  Eigen::Matrix2d hessian(const Vec& u, Complex w) const;

  double value_at(const Vec& u, int elem, const std::array<double, 3>& bary) const;

  const FeSpace& space() const { return *space_; }
  const Locator& locator() const { return *loc_; }

 private:
  const FeSpace* space_;
  const Locator* loc_;
};

/// Sparse operators of the disk model.
struct DiscreteOperators {
  SpMat stiffness;                  // flat Dirichlet form (conformally invariant)
  SpMat bulk_mass;                  // weight e^{2 what} (g0 volume)
  std::vector<SpMat> boundary_mass; // per sigma arc, weight e^{what} along the arc
  Vec lumped_bulk;                  // row sums of bulk_mass
};

DiscreteOperators assemble(const FeSpace& space);

/// Generic weighted mass matrices (used by the Robin operator in the solved
/// metric). `weight` takes the disk point; `degree` controls the rule.
SpMat assemble_weighted_mass(const FeSpace& space,
                             const std::function<double(Complex)>& weight, int duffy_n = 4);
SpMat assemble_weighted_boundary_mass(const FeSpace& space,
                                      const std::function<double(Complex, int)>& weight_arc);

}  // namespace liouville
