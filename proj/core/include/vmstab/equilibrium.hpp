#pragma once
#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "vmstab/discretization.hpp"
#include "vmstab/profiles.hpp"

namespace vmstab {

struct MomentPair {
  double h = 0, g = 0;
};

// h = int [mu+(<v>+phi, r(v_t+psi)) - mu-(<v>-phi, r(v_t-psi))] dv, g = same with vhat_t.
MomentPair moments(const Profile& prof, const VelocityQuad& quad, double r, double phi, double psi);

// C^1 cubic-spline potentials: phi extended evenly and psi oddly through r = 0, clamped at
// r = 1 with exact end slopes. Fields follow from the splines so that e and p are exact
// invariants of the interpolated dynamics.
class FieldSpline {
 public:
  FieldSpline() = default;
  FieldSpline(const std::vector<double>& phi, const std::vector<double>& psi, double dphi1, double dpsi1);
  double Phi(double r) const;
  double S(double r) const;
  double Er(double r) const;  // -Phi'
  double B(double r) const;   // S' + S/r
  double dB(double r) const;
  int knots_per_side() const { return n_; }
  bool zero_electric() const { return zero_phi_; }
  bool zero_magnetic() const { return zero_psi_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  int n_ = 0;
  bool zero_phi_ = true, zero_psi_ = true;
};

struct Equilibrium {
  RadialGrid grid;
  Profile profile;
  VelocityQuad quad;
  Eigen::VectorXd phi0, psi0, E0r, B0;  // at grid nodes
  double alpha = 0, beta = 0;
  std::string kind = "volterra";  // volterra | dirichlet
  std::string method = "picard";  // picard | newton
  double residual = 0;            // sup |fixed-point map(x) - x|
  double fd_residual = 0;         // sup of the 3-point discretized ODE residual on interior nodes
  double tol = 0;
  int iterations = 0;
  double contraction = 0;  // last measured update ratio
  double lipschitz_estimate = 0;
  std::vector<double> update_history;
  double sup_phi_during = 0;  // max |phi| over all iterates (symmetry monitor)
  bool damped = false;
  std::vector<std::string> notes;
  FieldSpline fields;

  double Phi(double r) const { return fields.Phi(r); }
  double S(double r) const { return fields.S(r); }
  double Er(double r) const { return fields.Er(r); }
  double B(double r) const { return fields.B(r); }
  double sup_phi() const { return phi0.size() ? phi0.cwiseAbs().maxCoeff() : 0.0; }
  double sup_psi() const { return psi0.size() ? psi0.cwiseAbs().maxCoeff() : 0.0; }
  bool homogeneous(double tol = 1e-13) const;
  bool purely_magnetic(double tol = 1e-13) const;  // E0 = 0
};

struct EquilibriumOptions {
  double tol = 1e-12;
  int max_iter = 400;
  int spline_knots = 0;  // per side; 0 -> max(256, 4n)
  bool allow_newton_fallback = true;  // Dirichlet solve only
};

// Picard iteration on the Volterra forms with free constants alpha (phi0(0)) and beta (psi0'(0)).
Equilibrium solve_equilibrium(const Profile& prof, double alpha, double beta, const RadialGrid& grid,
                              const VelocityQuad& quad, const EquilibriumOptions& opt = {});

// Purely magnetic equilibrium with psi0(1) = 0: -Delta_r psi0 = g(r, 0, psi0).
Equilibrium solve_psi0_dirichlet(const Profile& prof, const RadialGrid& grid, const VelocityQuad& quad,
                                 const EquilibriumOptions& opt = {});

// Homogeneous equilibrium (phi0 = psi0 = 0) without iteration, for profiles that support it.
Equilibrium homogeneous_equilibrium(const Profile& prof, const RadialGrid& grid, const VelocityQuad& quad);

struct FieldSamples {
  Eigen::VectorXd E0r, B0;
};
FieldSamples fields(const Equilibrium& eq);

// Independent damped-Newton solve of the 3-point discretization of -Delta phi = h, -Delta_r psi = g
// with Dirichlet data at r = 1 taken from `eq`. Returns nodal (phi, psi) and Newton iterations.
struct NewtonCheck {
  Eigen::VectorXd phi, psi;
  int iterations = 0;
  double residual = 0;
  bool converged = false;
  double max_diff = 0;  // vs eq nodal values
};
NewtonCheck newton_crosscheck(const Equilibrium& eq, double tol = 1e-12, int max_iter = 50);

// Exact Volterra representation for piecewise-linear h, g on `nodes` (nodes[0] = 0).
struct VolterraValues {
  std::vector<double> phi, psi, E, B;
};
VolterraValues volterra_eval(const std::vector<double>& nodes, const std::vector<double>& h,
                             const std::vector<double>& g, double alpha, double beta,
                             const std::vector<double>& targets);

}  // namespace vmstab
