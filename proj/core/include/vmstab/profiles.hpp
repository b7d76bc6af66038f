#pragma once
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace vmstab {

struct MuEval {
  double mu = 0, mu_e = 0, mu_p = 0;
};

using MuFn = std::function<MuEval(double e, double p)>;
using ScalarFn2 = std::function<double(double e, double p)>;

// Build an evaluator from a bare mu(e,p) using centered differences, h = 1e-5 (1+|e|).
MuFn finite_difference_derivatives(ScalarFn2 mu);

class Profile {
 public:
  Profile() = default;
  Profile(std::string name, MuFn plus, MuFn minus, double gamma = 3.0);

  const std::string& name() const { return name_; }
  // sigma = +1 (plus species) or -1 (minus species)
  MuEval eval(int sigma, double e, double p) const { return sigma > 0 ? plus_(e, p) : minus_(e, p); }
  double mu(int sigma, double e, double p) const { return eval(sigma, e, p).mu; }

  double C_mu() const { return C_mu_; }
  double gamma() const { return gamma_; }
  void set_decay(double C_mu, double gamma) { C_mu_ = C_mu; gamma_ = gamma; }

  // optional lower-bound data for the instability hypotheses: p mu^-_p >= c0 p^2 nu(e)
  bool has_nu() const { return static_cast<bool>(nu_); }
  double nu(double e) const { return nu_ ? nu_(e) : 0.0; }
  double c0() const { return c0_; }
  void set_nu(std::function<double(double)> nu, double c0) { nu_ = std::move(nu); c0_ = c0; }

  bool vacuum() const { return vacuum_; }
  void mark_vacuum() { vacuum_ = true; }

  const MuFn& plus() const { return plus_; }
  const MuFn& minus() const { return minus_; }

  // parameters as given at construction (name -> value), for reports
  std::map<std::string, double> params;

 private:
  std::string name_;
  MuFn plus_, minus_;
  double C_mu_ = 0, gamma_ = 3.0;
  std::function<double(double)> nu_;
  double c0_ = 0;
  bool vacuum_ = false;
};

// Numerical decay constant: sup (|mu_p|+|mu_e|+mu_p^2/|mu_e|)(1+|e|^gamma) over the physical
// net |v| <= vmax, |p| <= |v|, e = <v>.
double estimate_decay_constant(const Profile& prof, double gamma, double vmax = 40.0, int ns = 240,
                               int np = 81);

// Built-ins. Names: "maxwellian", "even_p", "damped", "skewed", "vacuum".
Profile make_profile(const std::string& name, const std::map<std::string, double>& params = {});
std::vector<std::string> builtin_profile_names();

Profile scale_amplitude(const Profile& prof, double K);
Profile scale_momentum(const Profile& prof, double K);
// independent species amplitudes (asymmetric plasmas)
Profile scale_species(const Profile& prof, double k_plus, double k_minus);

struct ClauseResult {
  std::string clause;
  bool pass = true;
  double worst = 0;  // worst value of the clause's measure
  double e = 0, p = 0;
  int sigma = 0;
};

struct AdmissibilityReport {
  bool pass = true;
  std::vector<ClauseResult> clauses;
  int samples = 0;
};

struct NetSpec {
  double vmax = 20.0;
  double phi_shift = 0.0;  // sup |phi0|
  double psi_shift = 0.0;  // sup |psi0|
};

// Checks mu >= 0, mu_e < 0, the decay bound with the profile's C_mu and gamma, derivative
// consistency against centered differences, and finiteness. Throws on non-finite values.
AdmissibilityReport check_admissible(const Profile& prof, int sample_count, const NetSpec& net = {},
                                     unsigned seed = 12345);

// max |mu+(e,p) - mu-(e,-p)| and max |mu+_p(e,p) + mu-_p(e,-p)| on the net.
struct SymmetryCheck {
  double mu_defect = 0, mu_p_defect = 0;
  bool holds(double tol = 1e-12) const { return mu_defect <= tol && mu_p_defect <= tol; }
};
SymmetryCheck check_species_symmetry(const Profile& prof, const NetSpec& net = {}, int n = 61);

}  // namespace vmstab
