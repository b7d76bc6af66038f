#pragma once
#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "vmstab/equilibrium.hpp"
#include "vmstab/operators.hpp"
#include "vmstab/trajectories.hpp"

namespace vmstab {

// smallest eigenvalue of L in the disk inner product, eigenvector with sum w psi^2 = 1
struct KappaResult {
  double kappa = 0;
  Eigen::VectorXd psi;
};
KappaResult kappa(const OperatorSet& ops);

// the same equilibrium family on another grid (homogeneous, volterra or dirichlet)
Equilibrium resolve_on_grid(const Equilibrium& eq, int n);

struct SpectralPoint {
  double lambda = 0, kappa = 0;
  Eigen::VectorXd psi;
};

struct SpectralCurve {
  std::vector<SpectralPoint> points;  // in evaluation order
  bool bracketed = false;
  double lambda_lo = 0, lambda_hi = 0;  // kappa(lo) < 0 < kappa(hi)
  std::vector<SpectralPoint> sorted() const;
};

struct LambdaSearchOptions {
  double lambda_min = 1e-2, lambda_max = 1e2;
  int scan_points = 25;
  double tol = 1e-6;  // on |kappa|
  int max_iter = 80;
  OperatorOptions ops;  // projection is forced to the orbit route for lambda > 0
};

struct LambdaStarResult {
  SpectralCurve curve;
  bool found = false;
  double lambda_star = 0, kappa_star = 0;
  Eigen::VectorXd psi;
  int iterations = 0;
  std::vector<std::string> warnings;
};
LambdaStarResult find_lambda_star(const Equilibrium& eq, const LambdaSearchOptions& opt = {});

// tolerances of the accepted growing mode; a residual up to 10x its gate is still accepted
struct ModeGates {
  double maxwell = 1e-4;      // both field equations, relative at interior nodes
  double flux = 1e-4;         // |lambda d_r phi - j_r|, relative
  double specular = 1e-6;
  double invariant = 1e-4;    // |I| / (mode norm)^2
  double casimir = 1e-4;
  double vlasov = 1e-4;
  double accept_factor = 10;
};

struct ModeOptions {
  OrbitOptions orbit;
  ModeGates gates;
  int vlasov_samples = 24;
  double vlasov_step = 1e-4;
  int specular_samples = 16;
  unsigned seed = 20240611;
};

struct ModeResiduals {
  double poisson = 0;      // (a) max |W(-Delta)phi - rho| / max|rho| over interior nodes
  double ampere = 0;       // (b) same for (-Delta_r + lambda^2) psi and the current
  double flux = 0;         // (c) max over interior faces |lambda phi' - j_r| / scale
  double flux_wall = 0;    // |j_r(1)|
  double vlasov = 0;       // (d) relative, along characteristics
  double specular = 0;     // max |f(1,v_r,v_t) - f(1,-v_r,v_t)| / sup|f|
  double invariant = 0;    // |I| / (mode norm)^2
  double casimir = 0;      // max over g in {1, e} and species of |K_g| / scale
  double eigen = 0;        // ||W L psi|| / ||psi||
};

struct GrowingMode {
  double lambda = 0;
  Eigen::VectorXd psi, phi;  // Dirichlet / Neumann zero mean, sum w psi^2 = 1
  double I = 0, IV = 0, field_energy = 0, norm2 = 0;
  double K1[2] = {0, 0}, Ke[2] = {0, 0};
  ModeResiduals res;
  bool accepted = false;
  std::vector<std::string> failures;
  std::vector<double> faces, flux, flux_fd;
  // f^sigma(z) = sigma [mu_e (phi + Q(vhat psi - phi)) + r mu_p psi]
  std::function<double(int sigma, const PhasePoint& z)> f;
};
GrowingMode reconstruct_mode(const Equilibrium& eq, double lambda, const Eigen::VectorXd& psi,
                             const ModeOptions& opt = {});

using Sampler = std::function<double(int sigma, const PhasePoint& z)>;

// Energy invariant on a state given by samplers; phase integrals by the equilibrium velocity rule
// times radial Gauss nodes, field terms from the grid operators.
double invariant_I(const Equilibrium& eq, const Sampler& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                   const Eigen::VectorXd& psi_t, int radial_nodes = 32);
// Casimir of species sigma; throws if g is not constant along a short characteristic.
double casimir_K(const Equilibrium& eq, int sigma, const Sampler& f, const Eigen::VectorXd& psi, const PhaseFn& g,
                 int radial_nodes = 32, double kernel_tol = 1e-8);

// I(lambda = 0 state) vs psi^T W L psi + ||psi_t||^2 with phi = A1^{-1} B psi, orbit route.
struct SideIdentity {
  double I = 0, rhs = 0, rel_defect = 0;
  double IV = 0, grad_phi = 0, grad_psi = 0, psi_t2 = 0;
};
SideIdentity stability_side_identity(const Equilibrium& eq, const OperatorSet& ops0_orbit, const Eigen::VectorXd& psi,
                                     double psi_t_scale = 1.0, const OrbitOptions& opt = {});

// antisymmetric test function with int (|psi'|^2 + psi^2/r^2) dx = 1
Eigen::VectorXd build_psi_star(const RadialGrid& g);
double psi_star_value(double r);  // normalized, continuous
double gradient_energy(const RadialGrid& g, const Eigen::VectorXd& psi);  // psi^T W (-Delta_r) psi

struct BoundA2Terms {
  double I = 0, IIA = 0, IIIA = 0, IIB = 0, IIIB = 0;
  double form = 0;  // <A2 psi, psi>
  double bound = 0;  // I + IIA + IIIA + IIB + IIIB
  bool holds = false;
};
BoundA2Terms boundA2_terms(const Equilibrium& eq, const OperatorSet& ops0, const Eigen::VectorXd& psi);

struct Certificate {
  std::string name;
  std::string hypothesis;
  bool applicable = true;
  bool hypothesis_holds = false;
  double value = 0, threshold = 0;
  std::string conclusion;  // what the theorem predicts when the hypothesis holds
  bool consistent = true;  // with the computed kappa0 / forms
  std::string detail;
};
std::vector<Certificate> theorem_certificates(const Equilibrium& eq, const OperatorSet& ops0);

struct StabilityReport {
  std::string verdict;  // stable | unstable | inconclusive
  double kappa0 = 0, kappa0_fine = 0, margin = 0;
  int n = 0, n_fine = 0;
  double kappa0_explicit = NAN, kappa0_orbit = NAN;
  std::string projection;  // route used for the verdict
  bool routes_disagree = false;
  Eigen::VectorXd psi0;  // eigenvector at lambda = 0
  OperatorDiagnostics diag;
  std::vector<Certificate> certificates;
  bool mode_searched = false;
  LambdaStarResult search;
  double kappa_limit_fit = NAN;  // linear fit of kappa(lambda) at the two smallest sampled lambda
  bool has_mode = false;
  GrowingMode mode;
  std::vector<std::string> notes;
  double seconds = 0;
};

struct VerdictOptions {
  OperatorOptions ops;
  bool refine = true;         // grid-convergence band from n and 2n
  double band_factor = 10;
  double min_margin = 1e-10;
  bool both_routes = true;    // also report the other kappa0 when explicit applies
  bool search_mode = true;    // lambda search and mode reconstruction if unstable
  LambdaSearchOptions search;
  ModeOptions mode;
};
StabilityReport verdict(const Equilibrium& eq, const VerdictOptions& opt = {});

enum class Scaling { Amplitude, Momentum };
enum class SweepFamily { Homogeneous, DirichletMagnetic };
Scaling parse_scaling(const std::string& s);
SweepFamily parse_family(const std::string& s);
std::string to_string(Scaling s);
std::string to_string(SweepFamily f);

struct SweepOptions {
  int n = 64;
  double quad_tol = 1e-10;
  int quad_level = 0;
  OperatorOptions ops;
  EquilibriumOptions eq;
  double K_rel_tol = 1e-4;  // bisection on K
  bool bisect = true;
};

struct SweepPoint {
  double K = 0;
  double form = 0;          // <A2 psi_*, psi_*>
  double kappa0 = 0;
  double rayleigh = 0;      // form / ||psi_*||^2
  double sup_psi0 = 0;
  BoundA2Terms bound;       // dirichlet-magnetic family only
  std::string verdict;      // sign of kappa0
};

struct SweepResult {
  Scaling scaling = Scaling::Amplitude;
  SweepFamily family = SweepFamily::Homogeneous;
  std::vector<SweepPoint> points;
  double K_star_form = NAN;   // sign change of the psi_* form
  double K_star_kappa = NAN;  // sign change of kappa0
  std::vector<std::string> notes;
};

Equilibrium sweep_equilibrium(const Profile& base, Scaling scaling, SweepFamily family, double K,
                              const SweepOptions& opt);
SweepPoint sweep_point(const Profile& base, Scaling scaling, SweepFamily family, double K, const SweepOptions& opt);
SweepResult sweep_K(const Profile& base, Scaling scaling, const std::vector<double>& Ks, SweepFamily family,
                    const SweepOptions& opt = {});

}  // namespace vmstab
