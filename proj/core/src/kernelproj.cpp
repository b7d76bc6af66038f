#include "vmstab/kernelproj.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vmstab/common.hpp"
#include "vmstab/parallel.hpp"
#include "vmstab/quadrature.hpp"

namespace vmstab {

std::string to_string(ProjectionStrategy s) {
  switch (s) {
    case ProjectionStrategy::HomogeneousExplicit: return "homogeneous-explicit";
    case ProjectionStrategy::PurelyMagneticExplicit: return "purely-magnetic-explicit";
    case ProjectionStrategy::QLambdaLimit: return "q-lambda-limit";
  }
  return "?";
}

ProjectionStrategy dispatch_strategy(const Equilibrium& eq) {
  if (eq.homogeneous()) return ProjectionStrategy::HomogeneousExplicit;
  if (eq.purely_magnetic()) return ProjectionStrategy::PurelyMagneticExplicit;
  return ProjectionStrategy::QLambdaLimit;
}

static void need_homogeneous(const Equilibrium& eq) {
  if (!eq.homogeneous()) throw Error("kernelproj", "explicit homogeneous projection needs E0 = B0 = 0");
}

static void need_magnetic(const Equilibrium& eq) {
  if (!eq.purely_magnetic()) throw Error("kernelproj", "explicit purely magnetic projection needs E0 = 0");
}

double project_radial_homogeneous(const Equilibrium& eq, const Eigen::VectorXd& psi) {
  need_homogeneous(eq);
  return eq.grid.integrate(psi) / kPi;
}

double project_radial_homogeneous(const Equilibrium& eq, const std::function<double(double)>& psi) {
  need_homogeneous(eq);
  std::vector<double> x, w;
  gauss_on(64, 0, 1, x, w);
  double s = 0;
  for (size_t k = 0; k < x.size(); ++k) s += w[k] * x[k] * psi(x[k]);
  return 2 * s;
}

double project_radial_purely_magnetic(const Equilibrium& eq, const Eigen::VectorXd& psi) {
  need_magnetic(eq);
  return eq.grid.integrate(psi) / kPi;
}

double psi_R(const RadialGrid& g, const Eigen::VectorXd& psi) { return integral_dr_dirichlet(g, psi); }

double r_psi0_psi_R(const Equilibrium& eq, const Eigen::VectorXd& psi) {
  Eigen::VectorXd v = eq.grid.nodes().cwiseProduct(eq.psi0).cwiseProduct(psi);
  return integral_dr_dirichlet(eq.grid, v);
}

PhaseFn project_vtheta_homogeneous(const Equilibrium& eq, const Eigen::VectorXd& psi) {
  need_homogeneous(eq);
  double R = psi_R(eq.grid, psi);
  return [R](const PhasePoint& z) { return 2 * z.r * z.vt / momentum_factor(z.vr, z.vt) * R; };
}

PhaseFn project_vtheta_purely_magnetic(const Equilibrium& eq, int sigma, const Eigen::VectorXd& psi) {
  need_magnetic(eq);
  double R = psi_R(eq.grid, psi), R2 = r_psi0_psi_R(eq, psi);
  const Equilibrium* e = &eq;
  return [=](const PhasePoint& z) {
    double gam = momentum_factor(z.vr, z.vt);
    double p = z.r * (z.vt + sigma * e->S(z.r));
    return 2 / gam * (p * R - sigma * R2);
  };
}

QLimitReport project_q_limit(const Equilibrium& eq, int sigma, const PhaseFn& g, const std::vector<PhasePoint>& pts,
                             const QLimitOptions& opt) {
  QLimitReport rep;
  rep.lambdas = opt.lambdas;
  for (size_t k = 1; k < opt.lambdas.size(); ++k)
    if (!(opt.lambdas[k] < opt.lambdas[k - 1]) || !(opt.lambdas[k] > 0))
      throw Error("kernelproj", "lambda sequence must be positive and decreasing");
  const size_t np = pts.size();
  for (double lam : opt.lambdas) {
    std::vector<double> v(np);
    parallel_chunks(np, kReductionChunks, [&](size_t lo, size_t hi, int) {
      for (size_t i = lo; i < hi; ++i) {
        if (opt.route == QRoute::Trajectory)
          v[i] = q_lambda(eq, sigma, lam, g, pts[i], opt.tail_tol, opt.traj).value;
        else
          v[i] = orbit_q(eq, sigma, lam, {g}, pts[i], opt.orbit)[0];
      }
    });
    rep.values.push_back(std::move(v));
  }
  int below = 0;
  rep.cauchy.push_back(0.0);
  for (size_t k = 1; k < rep.values.size(); ++k) {
    double d = 0;
    for (size_t i = 0; i < np; ++i) d = std::max(d, std::abs(rep.values[k][i] - rep.values[k - 1][i]));
    rep.cauchy.push_back(d);
    below = d <= opt.tol ? below + 1 : 0;
    if (below >= 2) rep.converged = true;
  }
  if (!rep.values.empty()) rep.limit = rep.values.back();
  if (!rep.converged) {
    std::ostringstream os;
    os << "no two successive Cauchy differences below " << opt.tol << " down to lambda = "
       << (opt.lambdas.empty() ? 0.0 : opt.lambdas.back());
    rep.note = os.str();
  }
  return rep;
}

PhaseSamples phase_samples(const Equilibrium& eq, int sigma, int radial_nodes, const VelocityQuad& quad) {
  PhaseSamples ps;
  ps.sigma = sigma;
  std::vector<double> x, w;
  gauss_on(radial_nodes, 0, 1, x, w);
  for (size_t k = 0; k < x.size(); ++k) {
    double r = x[k], ph = eq.Phi(r), S = eq.S(r);
    for (size_t j = 0; j < quad.size(); ++j) {
      double gam = momentum_factor(quad.vr[j], quad.vt[j]);
      double e = gam + sigma * ph, p = r * (quad.vt[j] + sigma * S);
      double me = std::abs(eq.profile.eval(sigma, e, p).mu_e);
      if (me == 0) continue;
      ps.z.push_back({r, quad.vr[j], quad.vt[j]});
      ps.w.push_back(2 * kPi * r * w[k] * quad.w[j] * me);
      ps.e.push_back(e);
      ps.p.push_back(p);
    }
  }
  return ps;
}

PhaseSamples phase_samples(const Equilibrium& eq, int sigma, int radial_nodes) {
  return phase_samples(eq, sigma, radial_nodes, eq.quad);
}

Eigen::VectorXd sample(const PhaseSamples& ps, const PhaseFn& f) {
  Eigen::VectorXd v(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) v[i] = f(ps.z[i]);
  return v;
}

double h_inner(const PhaseSamples& ps, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0;
  for (size_t i = 0; i < ps.size(); ++i) s += ps.w[i] * a[i] * b[i];
  return s;
}

double h_norm(const PhaseSamples& ps, const Eigen::VectorXd& a) { return std::sqrt(h_inner(ps, a, a)); }

Eigen::MatrixXd q_on_samples(const Equilibrium& eq, const PhaseSamples& ps, double lambda,
                             const std::vector<PhaseFn>& gs, const OrbitOptions& opt) {
  Eigen::MatrixXd out(ps.size(), gs.size());
  parallel_chunks(ps.size(), kReductionChunks, [&](size_t lo, size_t hi, int) {
    for (size_t i = lo; i < hi; ++i) {
      std::vector<double> v = orbit_q(eq, ps.sigma, lambda, gs, ps.z[i], opt);
      for (size_t k = 0; k < gs.size(); ++k) out(i, k) = v[k];
    }
  });
  return out;
}

Eigen::VectorXd q_on_samples(const Equilibrium& eq, const PhaseSamples& ps, double lambda, const PhaseFn& g,
                             const OrbitOptions& opt) {
  return q_on_samples(eq, ps, lambda, std::vector<PhaseFn>{g}, opt).col(0);
}

}  // namespace vmstab
