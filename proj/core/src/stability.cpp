#include "vmstab/stability.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_roots.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "vmstab/common.hpp"
#include "vmstab/kernelproj.hpp"
#include "vmstab/orbits.hpp"
#include "vmstab/quadrature.hpp"

namespace vmstab {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// relative residuals use the net size of the balanced terms; when those cancel to roundoff (species
// symmetry) the species-wise magnitude times this factor takes over. Orbit sums run over 1e5-1e6
// terms, so cancellation leaves up to ~1e-11 of the gross size.
constexpr double kRoundoff = 1e-10;

// smallest eigenvalue of -Delta_r (Dirichlet) in the disk inner product
double lambda1_dirichlet(const RadialGrid& g) {
  Eigen::VectorXd s = g.weights().cwiseSqrt();
  Eigen::MatrixXd WD = g.weights().asDiagonal() * laplacian_r_dirichlet(g).M;
  WD = 0.5 * (WD + WD.transpose());
  Eigen::MatrixXd S = s.cwiseInverse().asDiagonal() * WD * s.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace

// ---------------------------------------------------------------------------- kappa

KappaResult kappa(const OperatorSet& ops) {
  const Eigen::VectorXd w = ops.grid.weights();
  const Eigen::VectorXd s = w.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd S = s.asDiagonal() * ops.WL * s.asDiagonal();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw Error("stability", "eigensolver for L did not converge");
  KappaResult out;
  out.kappa = es.eigenvalues()[0];
  out.psi = s.cwiseProduct(es.eigenvectors().col(0));
  Eigen::Index imax;
  out.psi.cwiseAbs().maxCoeff(&imax);
  if (out.psi[imax] < 0) out.psi = -out.psi;
  return out;
}

Equilibrium resolve_on_grid(const Equilibrium& eq, int n) {
  RadialGrid g = build_grid(n, eq.grid.scheme);
  EquilibriumOptions o;
  if (eq.tol > 0) o.tol = eq.tol;
  if (eq.kind == "homogeneous") return homogeneous_equilibrium(eq.profile, g, eq.quad);
  if (eq.kind == "dirichlet") return solve_psi0_dirichlet(eq.profile, g, eq.quad, o);
  return solve_equilibrium(eq.profile, eq.alpha, eq.beta, g, eq.quad, o);
}

// ---------------------------------------------------------------------------- lambda search

std::vector<SpectralPoint> SpectralCurve::sorted() const {
  std::vector<SpectralPoint> v = points;
  std::sort(v.begin(), v.end(), [](const SpectralPoint& a, const SpectralPoint& b) { return a.lambda < b.lambda; });
  return v;
}

namespace {

struct KappaEval {
  const Equilibrium* eq;
  OperatorOptions oo;
  SpectralCurve* curve;
  std::map<double, size_t> cache;

  const SpectralPoint& at(double lam) {
    auto it = cache.find(lam);
    if (it != cache.end()) return curve->points[it->second];
    OperatorSet ops = assemble_operators(*eq, lam, oo);
    KappaResult k = kappa(ops);
    curve->points.push_back({lam, k.kappa, k.psi});
    cache[lam] = curve->points.size() - 1;
    return curve->points.back();
  }
};

double gsl_kappa(double lam, void* p) { return static_cast<KappaEval*>(p)->at(lam).kappa; }

}  // namespace

LambdaStarResult find_lambda_star(const Equilibrium& eq, const LambdaSearchOptions& opt) {
  if (!(opt.lambda_min > 0) || !(opt.lambda_max > opt.lambda_min) || opt.scan_points < 2)
    throw Error("stability", "lambda search needs 0 < lambda_min < lambda_max and >= 2 scan points");
  LambdaStarResult res;
  KappaEval ev{&eq, opt.ops, &res.curve, {}};
  if (ev.oo.projection == ProjectionMode::Explicit) ev.oo.projection = ProjectionMode::Orbit;

  const double ratio = opt.lambda_max / opt.lambda_min;
  double prev_l = 0, prev_k = 0;
  for (int k = 0; k < opt.scan_points; ++k) {
    double lam = opt.lambda_min * std::pow(ratio, static_cast<double>(k) / (opt.scan_points - 1));
    double kap = ev.at(lam).kappa;
    if (k == 0 && kap > 0) {
      res.warnings.push_back("kappa(lambda_min = " + fmt(lam) + ") = " + fmt(kap) +
                             " > 0: no growing mode above lambda_min; lambda* is below the scan range or kappa0 < 0 "
                             "is a projection artifact");
      return res;
    }
    if (k > 0 && prev_k < 0 && kap > 0) {
      res.curve.bracketed = true;
      res.curve.lambda_lo = prev_l;
      res.curve.lambda_hi = lam;
      break;
    }
    prev_l = lam;
    prev_k = kap;
  }
  if (!res.curve.bracketed) {
    res.warnings.push_back("NO SIGN CHANGE of kappa(lambda) up to lambda_max = " + fmt(opt.lambda_max) +
                           ": inconsistent with the large-lambda positivity, check the discretization");
    return res;
  }

  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_root_fsolver* s = gsl_root_fsolver_alloc(gsl_root_fsolver_brent);
  gsl_function F{&gsl_kappa, &ev};
  gsl_root_fsolver_set(s, &F, res.curve.lambda_lo, res.curve.lambda_hi);
  double root = res.curve.lambda_lo;
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    if (gsl_root_fsolver_iterate(s) != GSL_SUCCESS) {
      res.warnings.push_back("root iteration failed");
      break;
    }
    root = gsl_root_fsolver_root(s);
    double kr = ev.at(root).kappa;
    if (gsl_root_test_residual(kr, opt.tol) == GSL_SUCCESS) {
      res.found = true;
      break;
    }
    double lo = gsl_root_fsolver_x_lower(s), hi = gsl_root_fsolver_x_upper(s);
    if (hi - lo <= 1e-15 * hi) {
      res.warnings.push_back("bracket collapsed before |kappa| <= tol");
      break;
    }
  }
  gsl_root_fsolver_free(s);
  gsl_set_error_handler(old);
  const SpectralPoint& p = ev.at(root);
  res.lambda_star = p.lambda;
  res.kappa_star = p.kappa;
  res.psi = p.psi;
  if (!res.found) res.warnings.push_back("|kappa(lambda*)| = " + fmt(std::abs(p.kappa)) + " above tol");
  return res;
}

// ---------------------------------------------------------------------------- growing mode

GrowingMode reconstruct_mode(const Equilibrium& eq, double lambda, const Eigen::VectorXd& psi_in,
                             const ModeOptions& opt) {
  if (!(lambda > 0)) throw Error("stability", "growing mode needs lambda > 0");
  const RadialGrid& g = eq.grid;
  const int n = g.n;
  if (psi_in.size() != n) throw Error("stability", "psi has the wrong size");
  const Eigen::VectorXd w = g.weights();
  OperatorOptions oo;
  oo.projection = ProjectionMode::Orbit;
  oo.orbit = opt.orbit;
  OperatorSet ops = assemble_operators(eq, lambda, oo);

  GrowingMode m;
  m.lambda = lambda;
  m.psi = psi_in / std::sqrt(psi_in.dot(w.cwiseProduct(psi_in)));
  m.phi = solve_A1(ops, ops.B.M * m.psi);
  const Eigen::VectorXd& psi = m.psi;
  const Eigen::VectorXd& phi = m.phi;

  {
    Eigen::VectorXd Lp = ops.L.M * psi;
    m.res.eigen = std::sqrt(Lp.dot(w.cwiseProduct(Lp)));
  }

  ModeFunctionals mf = mode_functionals(eq, lambda, phi, psi, opt.orbit);
  const Eigen::MatrixXd WlapN = w.asDiagonal() * laplacian_neumann(g).M;
  const Eigen::MatrixXd WlapD = w.asDiagonal() * laplacian_r_dirichlet(g).M;
  {
    Eigen::VectorXd lhs = WlapN * phi;
    double sc = std::max({lhs.cwiseAbs().maxCoeff(), mf.charge.cwiseAbs().maxCoeff(), kRoundoff * mf.charge_abs.maxCoeff()});
    m.res.poisson = sc > 0 ? (lhs - mf.charge).cwiseAbs().maxCoeff() / sc : 0.0;
    Eigen::VectorXd lhs2 = WlapD * psi + lambda * lambda * w.cwiseProduct(psi);
    double sc2 =
        std::max({lhs2.cwiseAbs().maxCoeff(), mf.current.cwiseAbs().maxCoeff(), kRoundoff * mf.current_abs.maxCoeff()});
    m.res.ampere = sc2 > 0 ? (lhs2 - mf.current).cwiseAbs().maxCoeff() / sc2 : 0.0;
  }
  {
    m.faces = mf.faces;
    m.flux = mf.flux;
    m.flux_fd.resize(mf.faces.size());
    double sc = 0, worst = 0;
    for (size_t f = 0; f < mf.faces.size(); ++f) {
      int i = static_cast<int>(f) + 1;
      m.flux_fd[f] = lambda * (phi[i] - phi[i - 1]) / (g.r[i] - g.r[i - 1]);
      sc = std::max({sc, std::abs(m.flux_fd[f]), std::abs(m.flux[f]), kRoundoff * mf.flux_scale[f]});
      worst = std::max(worst, std::abs(m.flux_fd[f] - m.flux[f]));
    }
    m.res.flux = sc > 0 ? worst / sc : worst;
  }

  m.IV = mf.IV;
  m.field_energy = phi.dot(WlapN * phi) + psi.dot(WlapD * psi) + lambda * lambda * psi.dot(w.cwiseProduct(psi));
  m.I = m.IV + m.field_energy;
  m.norm2 = std::abs(m.IV) + m.field_energy;
  m.res.invariant = m.norm2 > 0 ? std::abs(m.I) / m.norm2 : 0.0;
  for (int s = 0; s < 2; ++s) {
    m.K1[s] = mf.K1[s];
    m.Ke[s] = mf.Ke[s];
    double a = mf.K1_scale[s] > 0 ? std::abs(mf.K1[s]) / mf.K1_scale[s] : 0.0;
    double b = mf.Ke_scale[s] > 0 ? std::abs(mf.Ke[s]) / mf.Ke_scale[s] : 0.0;
    m.res.casimir = std::max({m.res.casimir, a, b});
  }

  // F^sigma on demand; f^sigma = sigma F^sigma
  const Equilibrium* E = &eq;
  const OrbitOptions oopt = opt.orbit;
  auto Fs = [E, oopt, lambda, phi, psi](int sigma, const PhasePoint& z) {
    const RadialGrid& gg = E->grid;
    PhaseFn h = [&gg, &phi, &psi](const PhasePoint& y) {
      double vth = y.vt / momentum_factor(y.vr, y.vt);
      return vth * interp_dirichlet(gg, psi, y.r) - interp_neumann(gg, phi, y.r);
    };
    double H = orbit_q(*E, sigma, lambda, {h}, z, oopt)[0];
    double e = particle_energy(*E, sigma, z), p = particle_momentum(*E, sigma, z);
    MuEval mu = E->profile.eval(sigma, e, p);
    return mu.mu_e * (interp_neumann(gg, phi, z.r) + H) + z.r * mu.mu_p * interp_dirichlet(gg, psi, z.r);
  };
  m.f = [Fs](int sigma, const PhasePoint& z) { return sigma * Fs(sigma, z); };

  // Vlasov residual by central differences along characteristics
  {
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> ur(0.1, 0.9), uv(-3.0, 3.0);
    TrajectoryOptions to;
    to.record = false;
    const double d = opt.vlasov_step;
    double worst = 0;
    int done = 0, tries = 0;
    while (done < opt.vlasov_samples && tries < 50 * opt.vlasov_samples) {
      ++tries;
      PhasePoint z{ur(rng), uv(rng), uv(rng)};
      if (z.vr * z.vr + z.vt * z.vt >= 9.0) continue;
      double cellpos = z.r / g.h - std::floor(z.r / g.h);
      if (std::abs(cellpos - 0.5) < 0.05 || cellpos < 0.05 || cellpos > 0.95) continue;
      int sigma = (done % 2 == 0) ? 1 : -1;
      double e = particle_energy(eq, sigma, z), p = particle_momentum(eq, sigma, z);
      MuEval mu = eq.profile.eval(sigma, e, p);
      if (std::abs(mu.mu_e) < 1e-8) continue;
      PhasePoint zp = integrate(eq, sigma, z, d, to).end, zm = integrate(eq, sigma, z, -d, to).end;
      double F0 = Fs(sigma, z);
      double DF = (Fs(sigma, zp) - Fs(sigma, zm)) / (2 * d);
      double gam = momentum_factor(z.vr, z.vt);
      double vr = z.vr / gam, vth = z.vt / gam;
      int i0 = std::max(0, std::min(n - 2, static_cast<int>(std::floor(z.r / g.h - 0.5))));
      double dphi = (phi[i0 + 1] - phi[i0]) / g.h;
      double ps = interp_dirichlet(g, psi, z.r);
      double dpsi = (psi[i0 + 1] - psi[i0]) / g.h;
      if (z.r < g.r[0]) dpsi = psi[0] / g.r[0];
      if (z.r < g.r[0]) dphi = 0;
      double rhs = mu.mu_e * vr * dphi + lambda * (z.r * mu.mu_p + mu.mu_e * vth) * ps + mu.mu_p * vr * (ps + z.r * dpsi);
      double lhs = lambda * F0 + DF;
      double sc = std::abs(lambda * F0) + std::abs(DF) + std::abs(rhs);
      if (sc > 0) worst = std::max(worst, std::abs(lhs - rhs) / sc);
      ++done;
    }
    m.res.vlasov = worst;
  }

  // specularity of f at the wall, and j_r there
  {
    double sup = 0, defect = 0, flux = 0;
    for (int sigma : {1, -1}) {
      PhaseFn fs = [&m, sigma](const PhasePoint& z) { return m.f(sigma, z); };
      SpecularityReport sr = check_specularity(eq, sigma, fs, -0.5, opt.specular_samples, opt.seed + sigma + 1);
      defect = std::max(defect, sr.input_defect);
    }
    const VelocityQuad& q = eq.quad;
    for (size_t k = 0; k < q.size(); k += 4) {
      if (q.speed.size() && std::hypot(q.vr[k], q.vt[k]) > 3.0) continue;
      for (int sigma : {1, -1}) {
        for (int j = 0; j < 4; ++j) {
          PhasePoint z{1.0, q.vr[k + j], q.vt[k + j]};
          double fv = m.f(sigma, z);
          sup = std::max(sup, std::abs(fv));
          flux += q.w[k + j] * z.vr / momentum_factor(z.vr, z.vt) * fv;
        }
      }
    }
    m.res.specular = sup > 0 ? defect / sup : defect;
    m.res.flux_wall = std::abs(flux);
  }

  const ModeGates& G = opt.gates;
  auto gate = [&](const char* name, double v, double tol) {
    if (!(v <= G.accept_factor * tol)) m.failures.push_back(std::string(name) + " " + fmt(v) + " > " +
                                                             fmt(G.accept_factor) + " x " + fmt(tol));
  };
  gate("poisson", m.res.poisson, G.maxwell);
  gate("ampere", m.res.ampere, G.maxwell);
  gate("flux", m.res.flux, G.flux);
  gate("vlasov", m.res.vlasov, G.vlasov);
  gate("specular", m.res.specular, G.specular);
  gate("invariant", m.res.invariant, G.invariant);
  gate("casimir", m.res.casimir, G.casimir);
  m.accepted = m.failures.empty();
  return m;
}

// ---------------------------------------------------------------------------- invariants

namespace {

template <class Fn>
void phase_loop(const Equilibrium& eq, int radial_nodes, Fn&& fn) {
  std::vector<double> rx, rw;
  gauss_on(radial_nodes, 0.0, 1.0, rx, rw);
  const VelocityQuad& q = eq.quad;
  for (int sigma : {1, -1})
    for (int i = 0; i < radial_nodes; ++i)
      for (size_t k = 0; k < q.size(); ++k) {
        PhasePoint z{rx[i], q.vr[k], q.vt[k]};
        fn(sigma, z, 2 * kPi * rx[i] * rw[i] * q.w[k]);
      }
}

}  // namespace

double invariant_I(const Equilibrium& eq, const Sampler& f, const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                   const Eigen::VectorXd& psi_t, int radial_nodes) {
  const RadialGrid& g = eq.grid;
  double IV = 0;
  phase_loop(eq, radial_nodes, [&](int sigma, const PhasePoint& z, double W) {
    double e = particle_energy(eq, sigma, z), p = particle_momentum(eq, sigma, z);
    MuEval mu = eq.profile.eval(sigma, e, p);
    double ps = interp_dirichlet(g, psi, z.r);
    double vth = z.vt / momentum_factor(z.vr, z.vt);
    double term = -z.r * mu.mu_p * vth * ps * ps;
    if (mu.mu_e != 0) {
      double d = f(sigma, z) - sigma * z.r * mu.mu_p * ps;
      term += d * d / std::abs(mu.mu_e);
    }
    IV += W * term;
  });
  const Eigen::VectorXd w = g.weights();
  double field = phi.dot(w.asDiagonal() * (laplacian_neumann(g).M * phi)) +
                 psi.dot(w.asDiagonal() * (laplacian_r_dirichlet(g).M * psi)) + psi_t.dot(w.cwiseProduct(psi_t));
  return IV + field;
}

double casimir_K(const Equilibrium& eq, int sigma, const Sampler& f, const Eigen::VectorXd& psi, const PhaseFn& g,
                 int radial_nodes, double kernel_tol) {
  {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> ur(0.05, 0.95), uv(-2.0, 2.0);
    TrajectoryOptions to;
    to.record = false;
    for (int k = 0; k < 8; ++k) {
      PhasePoint z{ur(rng), uv(rng), uv(rng)};
      PhasePoint y = integrate(eq, sigma, z, -0.7, to).end;
      double a = g(z), b = g(y);
      if (std::abs(a - b) > kernel_tol * std::max(1.0, std::abs(a)))
        throw Error("stability", "casimir_K: g is not constant along characteristics (defect " +
                                     fmt(std::abs(a - b)) + ")");
    }
  }
  const RadialGrid& gr = eq.grid;
  double K = 0;
  std::vector<double> rx, rw;
  gauss_on(radial_nodes, 0.0, 1.0, rx, rw);
  const VelocityQuad& q = eq.quad;
  for (int i = 0; i < radial_nodes; ++i) {
    double ps = interp_dirichlet(gr, psi, rx[i]);
    for (size_t k = 0; k < q.size(); ++k) {
      PhasePoint z{rx[i], q.vr[k], q.vt[k]};
      double e = particle_energy(eq, sigma, z), p = particle_momentum(eq, sigma, z);
      MuEval mu = eq.profile.eval(sigma, e, p);
      double vth = z.vt / momentum_factor(z.vr, z.vt);
      double v = f(sigma, z) - sigma * mu.mu_e * vth * ps - sigma * z.r * mu.mu_p * ps;
      K += 2 * kPi * rx[i] * rw[i] * q.w[k] * v * g(z);
    }
  }
  return K;
}

SideIdentity stability_side_identity(const Equilibrium& eq, const OperatorSet& ops0, const Eigen::VectorXd& psi,
                                     double psi_t_scale, const OrbitOptions& opt) {
  if (ops0.lambda != 0 || ops0.diag.strategy != "orbit")
    throw Error("stability", "stability_side_identity needs the lambda = 0 orbit-route operators");
  const RadialGrid& g = eq.grid;
  const Eigen::VectorXd w = g.weights();
  Eigen::VectorXd phi = solve_A1(ops0, ops0.B.M * psi);
  ModeFunctionals mf = mode_functionals(eq, 0.0, phi, psi, opt);
  SideIdentity s;
  s.IV = mf.IV;
  s.grad_phi = phi.dot(w.asDiagonal() * (laplacian_neumann(g).M * phi));
  s.grad_psi = gradient_energy(g, psi);
  s.psi_t2 = psi_t_scale * psi_t_scale * psi.dot(w.cwiseProduct(psi));
  s.I = s.IV + s.grad_phi + s.grad_psi + s.psi_t2;
  s.rhs = psi.dot(ops0.WL * psi) + s.psi_t2;
  double sc = std::abs(s.IV) + s.grad_phi + s.grad_psi + s.psi_t2;
  s.rel_defect = sc > 0 ? std::abs(s.I - s.rhs) / sc : 0.0;
  return s;
}

// ---------------------------------------------------------------------------- psi_*

namespace {

double psi1_raw(double r) {
  if (r <= 0.5) return r * (0.5 - r);
  double q = 1 - r;
  return -q * (0.5 - q);
}
double dpsi1_raw(double r) { return r <= 0.5 ? 0.5 - 2 * r : -(0.5 - 2 * (1 - r)); }

double psi1_energy() {
  std::vector<double> x, w;
  double I = 0;
  for (auto [a, b] : {std::pair{0.0, 0.5}, std::pair{0.5, 1.0}}) {
    gauss_on(40, a, b, x, w);
    for (size_t k = 0; k < x.size(); ++k) {
      double r = x[k], d = dpsi1_raw(r), v = psi1_raw(r) / r;
      I += 2 * kPi * r * w[k] * (d * d + v * v);
    }
  }
  return I;
}

}  // namespace

double gradient_energy(const RadialGrid& g, const Eigen::VectorXd& psi) {
  return psi.dot(g.weights().asDiagonal() * (laplacian_r_dirichlet(g).M * psi));
}

double psi_star_value(double r) {
  static const double c = 1.0 / std::sqrt(psi1_energy());
  return c * psi1_raw(r);
}

Eigen::VectorXd build_psi_star(const RadialGrid& g) {
  Eigen::VectorXd v(g.n);
  for (int i = 0; i < g.n; ++i) v[i] = psi1_raw(g.r[i]);
  return v / std::sqrt(gradient_energy(g, v));
}

BoundA2Terms boundA2_terms(const Equilibrium& eq, const OperatorSet& ops0, const Eigen::VectorXd& psi) {
  const RadialGrid& g = eq.grid;
  const VelocityQuad& q = eq.quad;
  const Eigen::VectorXd w = g.weights();
  BoundA2Terms t;
  t.I = gradient_energy(g, psi);
  double sup_p = 0, sup_e = 0, ppe = 0, rps = 0;
  for (int i = 0; i < g.n; ++i) {
    double r = g.r[i], S = eq.psi0[i];
    double a = 0, bp = 0, be = 0, c = 0;
    for (size_t k = 0; k < q.size(); ++k) {
      double gam = momentum_factor(q.vr[k], q.vt[k]);
      double e = gam - eq.phi0[i], p = r * (q.vt[k] - S);
      MuEval mu = eq.profile.eval(-1, e, p);
      a += q.w[k] * p * mu.mu_p / gam;
      bp += q.w[k] * std::abs(mu.mu_p) / gam;
      be += q.w[k] * std::abs(mu.mu_e) / (gam * gam);
      c += q.w[k] * p * p * mu.mu_e / (gam * gam);
    }
    t.IIA += -2 * w[i] * a * psi[i] * psi[i];
    sup_p = std::max(sup_p, bp);
    sup_e = std::max(sup_e, be);
    ppe += w[i] * c;
    rps += w[i] * r * std::abs(S) * psi[i] * psi[i];
  }
  double pR = psi_R(g, psi), rR = r_psi0_psi_R(eq, psi);
  t.IIIA = -16 * ppe * pR * pR;
  t.IIB = 2 * sup_p * rps;
  t.IIIB = 16 * kPi * sup_e * rR * rR;
  t.bound = t.I + t.IIA + t.IIIA + t.IIB + t.IIIB;
  t.form = psi.dot(ops0.WA2 * psi);
  t.holds = t.form <= t.bound + 1e-10 * (std::abs(t.bound) + t.I);
  return t;
}

// ---------------------------------------------------------------------------- certificates

namespace {

struct NetBox {
  double e0, e1, p0, p1;
};

NetBox net_box(const Equilibrium& eq) {
  double sphi = eq.sup_phi(), spsi = eq.sup_psi();
  return {1.0 - sphi, 21.0 + sphi, -(20.0 + spsi), 20.0 + spsi};
}

double C_v(double gamma) {
  // 2 pi int_0^inf s ds / (1 + <s>^gamma)
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(200);
  auto fn = [](double s, void* p) {
    double gm = *static_cast<double*>(p);
    return s / (1 + std::pow(1 + s * s, 0.5 * gm));
  };
  gsl_function F;
  F.function = +fn;
  F.params = &gamma;
  double res = 0, err = 0;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_integration_qagiu(&F, 0.0, 1e-12, 1e-10, 200, ws, &res, &err);
  gsl_set_error_handler(old);
  gsl_integration_workspace_free(ws);
  return 2 * kPi * res;
}

}  // namespace

std::vector<Certificate> theorem_certificates(const Equilibrium& eq, const OperatorSet& ops0) {
  std::vector<Certificate> out;
  const Profile& pr = eq.profile;
  const RadialGrid& g = eq.grid;
  const VelocityQuad& q = eq.quad;
  const NetBox nb = net_box(eq);
  const int N = 161;
  double k0 = kappa(ops0).kappa;
  const double lam1 = lambda1_dirichlet(g);

  // i: p mu_p <= 0 and the sup-psi0 bound
  {
    Certificate c;
    c.name = "stab-i";
    c.hypothesis = "p mu_p <= 0 on the net and c0 sup|psi0| sup_r int <v>^-1 (|mu+_p| + |mu-_p|) dv <= 1";
    double worst = 0, scale = 0;
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        double e = nb.e0 + (nb.e1 - nb.e0) * a / (N - 1), p = nb.p0 + (nb.p1 - nb.p0) * b / (N - 1);
        for (int s : {1, -1}) {
          MuEval mu = pr.eval(s, e, p);
          worst = std::max(worst, p * mu.mu_p);
          scale = std::max(scale, std::abs(p * mu.mu_p));
        }
      }
    bool sign_ok = worst <= 1e-12 * std::max(1.0, scale);
    double sup_int = 0;
    for (int i = 0; i < g.n; ++i) {
      double r = g.r[i], v = 0;
      for (size_t k = 0; k < q.size(); ++k) {
        double gam = momentum_factor(q.vr[k], q.vt[k]);
        for (int s : {1, -1}) {
          MuEval mu = pr.eval(s, gam + s * eq.phi0[i], r * (q.vt[k] + s * eq.psi0[i]));
          v += q.w[k] * std::abs(mu.mu_p) / gam;
        }
      }
      sup_int = std::max(sup_int, v);
    }
    c.value = eq.sup_psi() * sup_int / lam1;
    c.threshold = 1;
    c.hypothesis_holds = sign_ok && c.value <= 1;
    c.conclusion = "stable (kappa0 > 0)";
    c.consistent = !c.hypothesis_holds || k0 > 0;
    c.detail = "max p mu_p = " + fmt(worst) + ", c0 = 1/" + fmt(lam1);
    out.push_back(c);
  }
  // ii: |mu_p| <= eps / (1 + |e|^gamma), E0 = 0
  {
    Certificate c;
    c.name = "stab-ii";
    c.hypothesis = "phi0 = 0 and 2 eps C_v / lambda_1 <= 1 with eps = sup |mu_p| (1 + |e|^gamma)";
    c.applicable = eq.purely_magnetic();
    double gm = pr.gamma(), eps = 0;
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        double e = nb.e0 + (nb.e1 - nb.e0) * a / (N - 1), p = nb.p0 + (nb.p1 - nb.p0) * b / (N - 1);
        for (int s : {1, -1}) eps = std::max(eps, std::abs(pr.eval(s, e, p).mu_p) * (1 + std::pow(std::abs(e), gm)));
      }
    double cv = C_v(gm);
    c.value = 2 * eps * cv / lam1;
    c.threshold = 1;
    c.hypothesis_holds = c.applicable && c.value <= 1;
    c.conclusion = "stable (kappa0 > 0)";
    c.consistent = !c.hypothesis_holds || k0 > 0;
    c.detail = "eps = " + fmt(eps) + ", C_v = " + fmt(cv) + ", lambda_1 = " + fmt(lam1);
    out.push_back(c);
  }
  // species symmetry: coupling B0 vanishes
  const bool simplified = check_species_symmetry(pr, NetSpec{20.0, eq.sup_phi(), eq.sup_psi()}).holds();
  {
    Certificate c;
    c.name = "simplified-cond";
    c.hypothesis = "mu+(e,p) = mu-(e,-p)";
    c.applicable = eq.purely_magnetic();
    c.hypothesis_holds = simplified;
    c.value = ops0.B.M.size() ? ops0.B.M.cwiseAbs().maxCoeff() : 0.0;
    c.threshold = 1e-10;
    c.conclusion = "B0 = 0, L0 = A2";
    c.consistent = !(c.applicable && simplified) || c.value <= c.threshold;
    c.detail = "max |B0_ij| = " + fmt(c.value);
    out.push_back(c);
  }
  // mg-unstab: p mu-_p >= c0 p^2 nu(e)
  {
    Certificate c;
    c.name = eq.homogeneous() ? "mg-unstab" : "mg-unstab-in";
    c.hypothesis = "p mu-_p(e,p) >= c0 p^2 nu(e)";
    c.applicable = pr.has_nu() && eq.purely_magnetic();
    if (c.applicable) {
      double worst = INFINITY;
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          double e = nb.e0 + (nb.e1 - nb.e0) * a / (N - 1), p = nb.p0 + (nb.p1 - nb.p0) * b / (N - 1);
          double d = p * pr.eval(-1, e, p).mu_p - pr.c0() * p * p * pr.nu(e);
          double sc = std::max(1e-300, std::abs(p * pr.eval(-1, e, p).mu_p));
          worst = std::min(worst, d / std::max(sc, 1e-12));
        }
      c.value = worst;
      c.threshold = -1e-10;
      c.hypothesis_holds = worst >= c.threshold;
      Eigen::VectorXd ps = build_psi_star(g);
      double form = ps.dot(ops0.WA2 * ps);
      c.conclusion = "unstable for large K; <A2 psi_*, psi_*> < 0 forces kappa0 < 0";
      c.consistent = !(simplified && form < 0) || k0 < 0;
      c.detail = "<A2 psi_*, psi_*> = " + fmt(form) + ", kappa0 = " + fmt(k0);
      if (!eq.homogeneous()) {
        BoundA2Terms t = boundA2_terms(eq, ops0, ps);
        c.detail += ", bound = " + fmt(t.bound) + (t.holds ? " (holds)" : " (VIOLATED)");
        c.consistent = c.consistent && t.holds && (!(simplified && t.bound < 0) || k0 < 0);
      }
    } else {
      c.detail = pr.has_nu() ? "needs E0 = 0" : "profile has no nu(e)";
    }
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------- verdict

StabilityReport verdict(const Equilibrium& eq, const VerdictOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  StabilityReport rep;
  rep.n = eq.grid.n;
  OperatorSet ops = assemble_operators(eq, 0.0, opt.ops);
  KappaResult k = kappa(ops);
  rep.kappa0 = k.kappa;
  rep.psi0 = k.psi;
  rep.diag = ops.diag;
  rep.projection = ops.diag.strategy;
  const bool explicit_ok = eq.purely_magnetic() && !eq.profile.vacuum();
  if (rep.projection == "orbit") rep.kappa0_orbit = k.kappa;
  else if (rep.projection != "vacuum") rep.kappa0_explicit = k.kappa;
  if (opt.both_routes && explicit_ok) {
    OperatorOptions o2 = opt.ops;
    o2.projection = rep.projection == "orbit" ? ProjectionMode::Explicit : ProjectionMode::Orbit;
    double other = kappa(assemble_operators(eq, 0.0, o2)).kappa;
    (rep.projection == "orbit" ? rep.kappa0_explicit : rep.kappa0_orbit) = other;
    if ((other < 0) != (k.kappa < 0)) {
      rep.routes_disagree = true;
      rep.notes.push_back("WARNING: kappa0 changes sign between the explicit (" + fmt(rep.kappa0_explicit) +
                          ") and orbit (" + fmt(rep.kappa0_orbit) + ") projections");
    }
  }

  rep.margin = opt.min_margin;
  if (opt.refine) {
    Equilibrium fine = resolve_on_grid(eq, 2 * eq.grid.n);
    OperatorOptions of = opt.ops;
    if (rep.projection == "orbit") of.projection = ProjectionMode::Orbit;
    rep.kappa0_fine = kappa(assemble_operators(fine, 0.0, of)).kappa;
    rep.n_fine = fine.grid.n;
    rep.margin = std::max(opt.min_margin, opt.band_factor * std::abs(rep.kappa0 - rep.kappa0_fine));
  }
  if (rep.kappa0 >= rep.margin) rep.verdict = "stable";
  else if (rep.kappa0 <= -rep.margin) rep.verdict = "unstable";
  else {
    rep.verdict = "inconclusive";
    rep.notes.push_back("|kappa0| = " + fmt(std::abs(rep.kappa0)) + " inside the grid-convergence band " +
                        fmt(rep.margin) + "; refine the grid");
  }

  rep.certificates = theorem_certificates(eq, ops);
  for (const auto& c : rep.certificates)
    if (c.applicable && !c.consistent) rep.notes.push_back("certificate " + c.name + " inconsistent: " + c.detail);

  if (rep.verdict == "unstable" && opt.search_mode) {
    rep.mode_searched = true;
    rep.search = find_lambda_star(eq, opt.search);
    for (const auto& w : rep.search.warnings) rep.notes.push_back("lambda search: " + w);
    auto pts = rep.search.curve.sorted();
    if (pts.size() >= 2) {
      double l0 = pts[0].lambda, l1 = pts[1].lambda;
      rep.kappa_limit_fit = pts[0].kappa - l0 * (pts[1].kappa - pts[0].kappa) / (l1 - l0);
      if ((rep.kappa_limit_fit < 0) != (rep.kappa0 < 0))
        rep.notes.push_back("WARNING: extrapolated kappa(lambda -> 0) = " + fmt(rep.kappa_limit_fit) +
                            " disagrees in sign with kappa0 = " + fmt(rep.kappa0));
    }
    if (rep.search.found) {
      rep.mode = reconstruct_mode(eq, rep.search.lambda_star, rep.search.psi, opt.mode);
      rep.has_mode = true;
      if (!rep.mode.accepted) {
        std::string s = "growing mode rejected:";
        for (const auto& f : rep.mode.failures) s += " " + f + ";";
        rep.notes.push_back(s);
      }
    }
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------- K sweeps

Scaling parse_scaling(const std::string& s) {
  if (s == "amplitude") return Scaling::Amplitude;
  if (s == "momentum") return Scaling::Momentum;
  throw ConfigError("unknown scaling '" + s + "' (amplitude|momentum)");
}

SweepFamily parse_family(const std::string& s) {
  if (s == "homogeneous") return SweepFamily::Homogeneous;
  if (s == "dirichlet-magnetic") return SweepFamily::DirichletMagnetic;
  throw ConfigError("unknown sweep family '" + s + "' (homogeneous|dirichlet-magnetic)");
}

std::string to_string(Scaling s) { return s == Scaling::Amplitude ? "amplitude" : "momentum"; }
std::string to_string(SweepFamily f) { return f == SweepFamily::Homogeneous ? "homogeneous" : "dirichlet-magnetic"; }

Equilibrium sweep_equilibrium(const Profile& base, Scaling scaling, SweepFamily family, double K,
                              const SweepOptions& opt) {
  Profile prof = scaling == Scaling::Amplitude ? scale_amplitude(base, K) : scale_momentum(base, K);
  RadialGrid g = build_grid(opt.n);
  VelocityQuadOptions qo;
  qo.tol = opt.quad_tol;
  qo.level = opt.quad_level;
  VelocityQuad quad = build_velocity_quad(prof, qo);
  if (family == SweepFamily::Homogeneous) return homogeneous_equilibrium(prof, g, quad);
  Equilibrium eq = solve_psi0_dirichlet(prof, g, quad, opt.eq);
  if (eq.sup_psi() > 0) {
    qo.psi_allow = eq.sup_psi();
    VelocityQuad q2 = build_velocity_quad(prof, qo);
    if (q2.vmax != quad.vmax) eq = solve_psi0_dirichlet(prof, g, q2, opt.eq);
  }
  return eq;
}

SweepPoint sweep_point(const Profile& base, Scaling scaling, SweepFamily family, double K, const SweepOptions& opt) {
  Equilibrium eq = sweep_equilibrium(base, scaling, family, K, opt);
  OperatorSet ops = assemble_operators(eq, 0.0, opt.ops);
  SweepPoint pt;
  pt.K = K;
  pt.kappa0 = kappa(ops).kappa;
  Eigen::VectorXd ps = build_psi_star(eq.grid);
  pt.form = ps.dot(ops.WA2 * ps);
  pt.rayleigh = pt.form / ps.dot(eq.grid.weights().cwiseProduct(ps));
  pt.sup_psi0 = eq.sup_psi();
  if (family == SweepFamily::DirichletMagnetic) pt.bound = boundA2_terms(eq, ops, ps);
  pt.verdict = pt.kappa0 > 0 ? "stable" : "unstable";
  return pt;
}

namespace {

double bisect_K(const std::function<double(double)>& f, double lo, double hi, double rel) {
  double flo = f(lo);
  for (int it = 0; it < 100 && hi - lo > rel * hi; ++it) {
    double mid = 0.5 * (lo + hi), fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SweepResult sweep_K(const Profile& base, Scaling scaling, const std::vector<double>& Ks, SweepFamily family,
                    const SweepOptions& opt) {
  SweepResult out;
  out.scaling = scaling;
  out.family = family;
  std::vector<double> ks = Ks;
  std::sort(ks.begin(), ks.end());
  for (double K : ks) out.points.push_back(sweep_point(base, scaling, family, K, opt));
  auto crossing = [&](auto get) -> int {
    for (size_t i = 1; i < out.points.size(); ++i)
      if (get(out.points[i - 1]) > 0 && get(out.points[i]) < 0) return static_cast<int>(i);
    return -1;
  };
  int cf = crossing([](const SweepPoint& p) { return p.form; });
  int ck = crossing([](const SweepPoint& p) { return p.kappa0; });
  if (cf > 0) {
    out.K_star_form = opt.bisect ? bisect_K([&](double K) { return sweep_point(base, scaling, family, K, opt).form; },
                                            out.points[cf - 1].K, out.points[cf].K, opt.K_rel_tol)
                                 : out.points[cf].K;
  } else {
    out.notes.push_back("no sign change of <A2 psi_*, psi_*> on the K list");
  }
  if (ck > 0) {
    out.K_star_kappa = opt.bisect
                           ? bisect_K([&](double K) { return sweep_point(base, scaling, family, K, opt).kappa0; },
                                      out.points[ck - 1].K, out.points[ck].K, opt.K_rel_tol)
                           : out.points[ck].K;
  } else {
    out.notes.push_back("no sign change of kappa0 on the K list");
  }
  for (const auto& p : out.points)
    if (p.kappa0 > p.rayleigh + 1e-9 * std::max(1.0, std::abs(p.rayleigh)))
      out.notes.push_back("kappa0 above the psi_* Rayleigh quotient at K = " + fmt(p.K));
  return out;
}

}  // namespace vmstab
