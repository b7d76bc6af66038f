#pragma once
#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "vmstab/equilibrium.hpp"
#include "vmstab/orbits.hpp"
#include "vmstab/trajectories.hpp"

namespace vmstab {

// Projection onto ker D in H = L^2 with weight |mu_e|.
enum class ProjectionStrategy { HomogeneousExplicit, PurelyMagneticExplicit, QLambdaLimit };

std::string to_string(ProjectionStrategy s);
// closed forms when the fields allow them, the lambda -> 0 limit otherwise
ProjectionStrategy dispatch_strategy(const Equilibrium& eq);

// Disk average (1/pi) int psi dx of nodal samples (grid weights). Throws unless homogeneous.
double project_radial_homogeneous(const Equilibrium& eq, const Eigen::VectorXd& psi);
// same for a function of r, by Gauss quadrature
double project_radial_homogeneous(const Equilibrium& eq, const std::function<double(double)>& psi);
// Throws unless E0 = 0.
double project_radial_purely_magnetic(const Equilibrium& eq, const Eigen::VectorXd& psi);

// psi_R = int_0^1 psi dr of the Dirichlet interpolant
double psi_R(const RadialGrid& g, const Eigen::VectorXd& psi);
// (r psi0 psi)_R
double r_psi0_psi_R(const Equilibrium& eq, const Eigen::VectorXd& psi);

// P(vhat_theta psi) = 2 r vhat_theta psi_R (homogeneous fields)
PhaseFn project_vtheta_homogeneous(const Equilibrium& eq, const Eigen::VectorXd& psi);
// P^sigma(vhat_theta psi) = 2 <v>^{-1} [p psi_R - sigma (r psi0 psi)_R], p = r (v_theta + sigma psi0)
PhaseFn project_vtheta_purely_magnetic(const Equilibrium& eq, int sigma, const Eigen::VectorXd& psi);

enum class QRoute { Trajectory, Orbit };

struct QLimitOptions {
  std::vector<double> lambdas{1.0, 0.3, 0.1, 0.03, 0.01};  // decreasing
  double tol = 1e-3;       // Cauchy tolerance (sup over the points)
  double tail_tol = 1e-12;  // truncation of the backward integral (trajectory route)
  QRoute route = QRoute::Trajectory;
  TrajectoryOptions traj;
  OrbitOptions orbit;
};

struct QLimitReport {
  std::vector<double> lambdas;
  std::vector<std::vector<double>> values;  // [lambda][point]
  std::vector<double> cauchy;              // sup |Q_k - Q_{k-1}| (first entry 0)
  std::vector<double> limit;               // values at the smallest lambda
  bool converged = false;                  // two successive Cauchy differences below tol
  std::string note;
};

QLimitReport project_q_limit(const Equilibrium& eq, int sigma, const PhaseFn& g, const std::vector<PhasePoint>& pts,
                             const QLimitOptions& opt = {});

// Phase-space sample set for H inner products: radial Gauss nodes x the equilibrium velocity rule,
// weight 2 pi r w_r w_v |mu_e|.
struct PhaseSamples {
  int sigma = 1;
  std::vector<PhasePoint> z;
  std::vector<double> w;       // includes |mu_e|
  std::vector<double> e, p;    // invariants at the samples
  size_t size() const { return z.size(); }
};
PhaseSamples phase_samples(const Equilibrium& eq, int sigma, int radial_nodes = 24);
// same with a caller-supplied velocity rule (e.g. a cheaper one for trajectory-heavy checks)
PhaseSamples phase_samples(const Equilibrium& eq, int sigma, int radial_nodes, const VelocityQuad& quad);

Eigen::VectorXd sample(const PhaseSamples& ps, const PhaseFn& f);
double h_inner(const PhaseSamples& ps, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double h_norm(const PhaseSamples& ps, const Eigen::VectorXd& a);

// Q_lambda g at every sample, via orbits (lambda = 0: the orbit average, i.e. the projection).
Eigen::VectorXd q_on_samples(const Equilibrium& eq, const PhaseSamples& ps, double lambda, const PhaseFn& g,
                             const OrbitOptions& opt = {});
// several functions along the same orbits; result column k belongs to gs[k]
Eigen::MatrixXd q_on_samples(const Equilibrium& eq, const PhaseSamples& ps, double lambda,
                             const std::vector<PhaseFn>& gs, const OrbitOptions& opt = {});

}  // namespace vmstab
