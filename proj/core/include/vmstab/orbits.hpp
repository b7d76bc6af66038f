#pragma once
#include <Eigen/Dense>
#include <vector>

#include "vmstab/equilibrium.hpp"
#include "vmstab/trajectories.hpp"

namespace vmstab {

// Phase space of a radial equilibrium foliated by periodic radial orbits. An orbit of species
// sigma is labelled by its inner turning radius r_in, the speed s there and the sign b of v_theta:
//   e = <s> + sigma Phi(r_in),  p = r_in (b s + sigma S(r_in)),
// and dx dv = 2 pi J dr_in ds dt with J = r_in F'(r_in) / (2 <s>), F(r) = v_r(r)^2 on the orbit.
// Along an orbit, Q_lambda g solves G' = lambda (g - G) with periodic closure; it is integrated by
// Gauss collocation on pieces split at the grid knots.
struct OrbitOptions {
  int rin_per_cell = 2;       // Gauss nodes per knot cell for r_in
  int nodes_per_piece = 4;    // collocation nodes
  double max_dtheta = 0.39269908169872414;  // pi/8
  double lambda_dt_max = 2.0;  // pieces are split until lambda * duration <= this
  bool face_breaks = false;    // also split at the cell faces (flux diagnostics)
  int speed_refine = 0;        // extra splitting of the speed panels (2^k)
};

struct OrbitForms {
  double lambda = 0;
  int n = 0;
  // index k < n: Neumann hat U_k; k >= n: vhat_theta times Dirichlet hat U_{k-n}.
  // K_ij = sum_sigma <<mu_e a_i Q(a_j)>>, M_ij = sum_sigma <<mu_e a_i a_j>>
  Eigen::MatrixXd K, M;
  Eigen::MatrixXd Npp;  // sum <<r vhat_theta mu_p U_i U_j>> (Dirichlet hats)
  Eigen::MatrixXd Nfp;  // sum <<r mu_p U^N_i U^D_j>>
  double raw_symmetry_defect = 0;  // ||K - K^T|| / ||K||
  long orbits = 0, skipped = 0;
  long pieces = 0;
};

OrbitForms assemble_orbit_forms(const Equilibrium& eq, double lambda, const OrbitOptions& opt = {});

// Q_lambda g_k(z) for several g along the orbit through z (lambda = 0: orbit average).
std::vector<double> orbit_q(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                            const PhasePoint& z, const OrbitOptions& opt = {});

// Radial period of the orbit through z (0 for degenerate orbits) and whether it reaches the wall.
struct OrbitInfo {
  double period = 0, r_in = 0, r_out = 0;
  bool wall = false;
  bool valid = false;
};
OrbitInfo orbit_info(const Equilibrium& eq, int sigma, const PhasePoint& z);

// Functionals of the growing-mode distribution F^sigma = mu_e (phi + H) + r mu_p psi with
// H = Q_lambda(vhat_theta psi - phi), evaluated by one orbit sweep.
struct ModeFunctionals {
  Eigen::VectorXd charge;    // rows <<U^N_i F>> summed over species
  Eigen::VectorXd current;   // rows <<vhat_theta U^D_i F>>
  Eigen::VectorXd charge_abs;  // sum over species of |rows| (scale)
  Eigen::VectorXd current_abs;
  double IV = 0;           // sum <<-mu_e (phi + H)^2 - r mu_p vhat_theta psi^2>>
  double K1[2] = {0, 0};   // Casimirs g = 1 for (+, -)
  double Ke[2] = {0, 0};   // g = e
  double K1_scale[2] = {0, 0}, Ke_scale[2] = {0, 0};
  std::vector<double> faces;        // face radii
  std::vector<double> flux;         // j_r at faces
  std::vector<double> flux_scale;   // sum of |contributions|
};
ModeFunctionals mode_functionals(const Equilibrium& eq, double lambda, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& psi, const OrbitOptions& opt = {});

// Generic phase-space integral sum_sigma int int f dv dx through the orbit quadrature, for f
// given as a function of (sigma, e, p, z). Used in tests.
using OrbitIntegrand = std::function<double(int sigma, double e, double p, const PhasePoint& z)>;
double orbit_phase_integral(const Equilibrium& eq, const OrbitIntegrand& f, const OrbitOptions& opt = {});

}  // namespace vmstab
