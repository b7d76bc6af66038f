#pragma once
#include <functional>
#include <vector>

#include "vmstab/equilibrium.hpp"

namespace vmstab {

// (r, v_r, v_theta) in the polar frame at the particle position
struct PhasePoint {
  double r = 0, vr = 0, vt = 0;
};

// specular reflection v_r -> -v_r; throws unless |r - 1| <= 1e-9
PhasePoint reflect(const PhasePoint& z);

double particle_energy(const Equilibrium& eq, int sigma, const PhasePoint& z);
double particle_momentum(const Equilibrium& eq, int sigma, const PhasePoint& z);

struct TrajectoryOptions {
  double tol = 1e-13;        // abs and rel tolerance of the embedded RK pair; 1e-12 lets p drift ~1e-8 over s ~ 50
  double event_tol = 1e-12;  // |r - 1| at reflections
  double grazing = 1e-10;    // |v_r| below this at the wall: no reflection
  long max_steps = 5'000'000;
  bool record = true;  // keep every accepted step
};

struct TrajSample {
  double s = 0;
  PhasePoint z;
  bool reflection = false;
};

struct Trajectory {
  int species = 1;
  std::vector<TrajSample> samples;  // ordered in |s|
  int reflections = 0;
  double e_drift = 0, p_drift = 0;  // max deviation over the recorded samples
  PhasePoint end;
  long steps = 0;
};

// Characteristics of D^sigma from z over s in [0, s_end] (s_end < 0 integrates backwards).
Trajectory integrate(const Equilibrium& eq, int sigma, const PhasePoint& z, double s_end,
                     const TrajectoryOptions& opt = {});

// Lower level: calls seg(s0, s1, at) on consecutive smooth pieces of the path, where at(s)
// evaluates the state inside [s0, s1] from the dense output. Stops early if seg returns false.
using SegmentFn = std::function<bool(double s0, double s1, const std::function<PhasePoint(double)>& at)>;
Trajectory walk(const Equilibrium& eq, int sigma, const PhasePoint& z, double s_end, const TrajectoryOptions& opt,
                const SegmentFn& seg);

using PhaseFn = std::function<double(const PhasePoint&)>;

struct QLambdaResult {
  double value = 0;
  double horizon = 0;     // S
  double tail_bound = 0;  // e^{-lambda S} sup|g| before renormalization
  int reflections = 0;
};

// Q_lambda g(z) = int_{-inf}^0 lambda e^{lambda s} g(X(s), V(s)) ds, truncated at S = -ln(tol)/lambda
// and renormalized by 1 - e^{-lambda S} (so constants are reproduced exactly).
QLambdaResult q_lambda(const Equilibrium& eq, int sigma, double lambda, const PhaseFn& g, const PhasePoint& z,
                       double tol = 1e-12, const TrajectoryOptions& opt = {});
// several functions along one path
std::vector<double> q_lambda_many(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                                  const PhasePoint& z, double tol = 1e-12, const TrajectoryOptions& opt = {});

struct SpecularityReport {
  double input_defect = 0;        // max |g(1,v) - g(1,v~)| over the samples
  double transported_defect = 0;  // same for g(X(s), V(s))
  int samples = 0;
  bool specular(double tol) const { return input_defect <= tol && transported_defect <= tol; }
};
// Boundary samples (1, v_r, v_theta), v_r > 0, drawn from a fixed seed; transport time s.
SpecularityReport check_specularity(const Equilibrium& eq, int sigma, const PhaseFn& g, double s = -2.0,
                                    int samples = 32, unsigned seed = 7);

// Both sides of <<mu_e h Q(g)>> = <<mu_e g(x, v~) Q(h~)>>, h~(x, v) = h(x, v~), for one species, by a tensor
// rule (radial Gauss x speed Gauss panels x uniform angles) and backward integration at every node.
struct AdjointQuad {
  int radial = 12, speed = 6, angles = 16;
  double vmax = 24.0;
  double tail_tol = 1e-13;
};
struct AdjointPair {
  double lhs = 0, rhs = 0, rel_defect = 0;
};
struct AdjointReport {
  std::vector<AdjointPair> pairs;
  long trajectories = 0;
  double worst = 0;
};
AdjointReport check_adjoint(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                            const std::vector<PhaseFn>& hs, const AdjointQuad& q = {},
                            const TrajectoryOptions& opt = {});

}  // namespace vmstab
