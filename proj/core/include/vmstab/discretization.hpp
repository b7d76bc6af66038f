#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vmstab/profiles.hpp"

namespace vmstab {

enum class GridScheme { FiniteDifference, Gauss };

struct RadialGrid {
  int n = 0;
  std::vector<double> r;  // nodes, strictly inside (0,1)
  std::vector<double> w;  // disk weights, include 2 pi r
  GridScheme scheme = GridScheme::FiniteDifference;
  double h = 0;  // spacing (finite-difference scheme)

  // interpolation knots {0, r_1, ..., r_n, 1}
  std::vector<double> knots() const;
  double integrate(const Eigen::VectorXd& f) const;
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  Eigen::VectorXd weights() const { return Eigen::Map<const Eigen::VectorXd>(w.data(), n); }
  Eigen::VectorXd nodes() const { return Eigen::Map<const Eigen::VectorXd>(r.data(), n); }
};

RadialGrid build_grid(int n, GridScheme scheme = GridScheme::FiniteDifference);

enum class BoundaryKind { NeumannZeroMean, Dirichlet, None };

struct RadialOperator {
  Eigen::MatrixXd M;
  BoundaryKind bc = BoundaryKind::None;
  double lambda = 0;
  std::string tag;
};

// relative defect of W M against its transpose, ||WM - (WM)^T|| / ||WM||
double symmetry_defect(const RadialGrid& g, const Eigen::MatrixXd& M);
// (M + W^{-1} M^T W)/2
Eigen::MatrixXd symmetrize(const RadialGrid& g, const Eigen::MatrixXd& M);
// W^{-1} M^T W
Eigen::MatrixXd weighted_adjoint(const RadialGrid& g, const Eigen::MatrixXd& M);

RadialOperator laplacian_neumann(const RadialGrid& g);
RadialOperator laplacian_r_dirichlet(const RadialGrid& g);

// Piecewise-linear interpolants on the knots. Neumann-type: constant on [0,r_1] and [r_n,1].
// Dirichlet-type: linear to 0 at r=0 and at r=1.
struct HatWeights {
  int i0 = -1, i1 = -1;
  double a0 = 0, a1 = 0;
};
// cell index c in [0, n]: knots[c] <= r <= knots[c+1]
int knot_cell(const RadialGrid& g, double r);
HatWeights hat_neumann(const RadialGrid& g, int cell, double r);
HatWeights hat_dirichlet(const RadialGrid& g, int cell, double r);
double interp_neumann(const RadialGrid& g, const Eigen::VectorXd& v, double r);
double interp_dirichlet(const RadialGrid& g, const Eigen::VectorXd& v, double r);
// exact integral over [0,1] (dr, no 2 pi r) of the Dirichlet-type interpolant
double integral_dr_dirichlet(const RadialGrid& g, const Eigen::VectorXd& v);
// linear functional form of the same: psi_R = c . psi
Eigen::VectorXd integral_dr_dirichlet_weights(const RadialGrid& g);

// Velocity quadrature on |v| <= vmax: radial Gauss panels x uniform angles. Nodes come in
// quadruplets (c,s), (-c,s), (c,-s), (-c,-s) so odd integrands cancel exactly.
struct VelocityQuad {
  std::vector<double> vr, vt, w;
  std::vector<double> speed, speed_w;  // radial nodes and weights (ds, no s factor)
  int n_angle = 0;
  double vmax = 0;
  double tail_estimate = 0;   // numerical relative tail of int |mu_e| dv beyond vmax
  double tail_algebraic = 0;  // bound from C_mu/(1+e^gamma), reported only
  double tol = 0;
  int level = 0;
  double phi_allow = 0, psi_allow = 0;  // field shifts the tail estimate accounts for

  size_t size() const { return w.size(); }
  template <class F>
  double integrate(F&& f) const {
    double total = 0;
    for (size_t k = 0; k < w.size(); k += 4) {
      double a = w[k] * f(vr[k], vt[k]) + w[k + 1] * f(vr[k + 1], vt[k + 1]);
      double b = w[k + 2] * f(vr[k + 2], vt[k + 2]) + w[k + 3] * f(vr[k + 3], vt[k + 3]);
      total += a + b;
    }
    return total;
  }
};

struct VelocityQuadOptions {
  double tol = 1e-10;
  int level = 0;
  double phi_allow = 0, psi_allow = 0;
  double vmax_override = 0;  // > 0 forces vmax
  double vmax_cap = 400.0;
};

VelocityQuad build_velocity_quad(const Profile& prof, const VelocityQuadOptions& opt);
inline VelocityQuad build_velocity_quad(const Profile& prof, double tol, int level) {
  VelocityQuadOptions o;
  o.tol = tol;
  o.level = level;
  return build_velocity_quad(prof, o);
}

}  // namespace vmstab
