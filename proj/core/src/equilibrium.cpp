#include "vmstab/equilibrium.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <sstream>

#include "vmstab/common.hpp"

namespace vmstab {

MomentPair moments(const Profile& prof, const VelocityQuad& quad, double r, double phi, double psi) {
  if (std::abs(phi) > quad.phi_allow * (1 + 1e-12) + 1e-14 ||
      std::abs(psi) > quad.psi_allow * (1 + 1e-12) + 1e-14) {
    std::ostringstream os;
    os << "moments: field shift (phi=" << phi << ", psi=" << psi
       << ") exceeds the range the velocity tail was certified for (" << quad.phi_allow << ", "
       << quad.psi_allow << ")";
    throw Error("equilibrium", os.str());
  }
  MomentPair m;
  m.h = quad.integrate([&](double vr, double vt) {
    double ev = std::sqrt(1 + vr * vr + vt * vt);
    return prof.mu(1, ev + phi, r * (vt + psi)) - prof.mu(-1, ev - phi, r * (vt - psi));
  });
  m.g = quad.integrate([&](double vr, double vt) {
    double ev = std::sqrt(1 + vr * vr + vt * vt);
    return (vt / ev) * (prof.mu(1, ev + phi, r * (vt + psi)) - prof.mu(-1, ev - phi, r * (vt - psi)));
  });
  return m;
}

// ------------------------------------------------------------------ splines

struct FieldSpline::Impl {
  boost::math::interpolators::cardinal_cubic_b_spline<double> phi, psi;
};

FieldSpline::FieldSpline(const std::vector<double>& phi, const std::vector<double>& psi, double dphi1,
                         double dpsi1) {
  const int N = static_cast<int>(phi.size()) - 1;
  n_ = N;
  std::vector<double> ep(2 * N + 1), op(2 * N + 1);
  for (int k = -N; k <= N; ++k) {
    ep[k + N] = phi[std::abs(k)];
    op[k + N] = (k < 0 ? -1.0 : 1.0) * psi[std::abs(k)];
  }
  op[N] = 0.0;
  zero_phi_ = std::all_of(phi.begin(), phi.end(), [](double x) { return x == 0.0; });
  zero_psi_ = std::all_of(psi.begin(), psi.end(), [](double x) { return x == 0.0; });
  double h = 1.0 / N;
  auto impl = std::make_shared<Impl>(Impl{
      boost::math::interpolators::cardinal_cubic_b_spline<double>(ep.data(), ep.size(), -1.0, h, -dphi1, dphi1),
      boost::math::interpolators::cardinal_cubic_b_spline<double>(op.data(), op.size(), -1.0, h, dpsi1, dpsi1)});
  impl_ = impl;
}

double FieldSpline::Phi(double r) const { return zero_phi_ ? 0.0 : impl_->phi(r); }
double FieldSpline::S(double r) const { return zero_psi_ ? 0.0 : impl_->psi(r); }
double FieldSpline::Er(double r) const { return zero_phi_ ? 0.0 : -impl_->phi.prime(r); }
double FieldSpline::B(double r) const {
  if (zero_psi_) return 0.0;
  if (r < 1e-10) return 2 * impl_->psi.prime(0.0);
  return impl_->psi.prime(r) + impl_->psi(r) / r;
}
double FieldSpline::dB(double r) const {
  if (zero_psi_) return 0.0;
  double d = 1e-6;
  double a = std::max(r - d, 0.0), b = std::min(r + d, 1.0);
  return (B(b) - B(a)) / (b - a);
}

bool Equilibrium::homogeneous(double t) const {
  return (fields.zero_electric() || E0r.cwiseAbs().maxCoeff() <= t) &&
         (fields.zero_magnetic() || B0.cwiseAbs().maxCoeff() <= t);
}

bool Equilibrium::purely_magnetic(double t) const {
  return fields.zero_electric() || E0r.cwiseAbs().maxCoeff() <= t;
}

// ------------------------------------------------------------------ Volterra forms

namespace {

inline double F1(double s) { return s > 0 ? s * s * (0.5 * std::log(s) - 0.25) : 0.0; }
inline double F2(double s) { return s > 0 ? s * s * s * (std::log(s) / 3.0 - 1.0 / 9.0) : 0.0; }

struct CellInts {
  double slogs, s, s2, one;
};

// integrals over [a, x] of the linear function through (a, fa), (b, fb)
CellInts cell_ints(double a, double b, double fa, double fb, double x) {
  double c1 = (fb - fa) / (b - a);
  double c0 = fa - c1 * a;
  CellInts r;
  r.slogs = c0 * (F1(x) - F1(a)) + c1 * (F2(x) - F2(a));
  r.s = c0 * (x * x - a * a) / 2 + c1 * (x * x * x - a * a * a) / 3;
  r.s2 = c0 * (x * x * x - a * a * a) / 3 + c1 * (x * x * x * x - a * a * a * a) / 4;
  r.one = c0 * (x - a) + c1 * (x * x - a * a) / 2;
  return r;
}

}  // namespace

VolterraValues volterra_eval(const std::vector<double>& nodes, const std::vector<double>& h,
                             const std::vector<double>& g, double alpha, double beta,
                             const std::vector<double>& targets) {
  const size_t m = nodes.size();
  VolterraValues out;
  out.phi.resize(targets.size());
  out.psi.resize(targets.size());
  out.E.resize(targets.size());
  out.B.resize(targets.size());
  // cumulative integrals at nodes
  std::vector<double> A(m, 0), C(m, 0), D(m, 0), G(m, 0);
  for (size_t k = 0; k + 1 < m; ++k) {
    CellInts ch = cell_ints(nodes[k], nodes[k + 1], h[k], h[k + 1], nodes[k + 1]);
    CellInts cg = cell_ints(nodes[k], nodes[k + 1], g[k], g[k + 1], nodes[k + 1]);
    A[k + 1] = A[k] + ch.slogs;
    C[k + 1] = C[k] + ch.s;
    D[k + 1] = D[k] + cg.s2;
    G[k + 1] = G[k] + cg.one;
  }
  for (size_t t = 0; t < targets.size(); ++t) {
    double R = targets[t];
    if (R <= 0) {
      out.phi[t] = alpha;
      out.psi[t] = 0;
      out.E[t] = 0;
      out.B[t] = 2 * beta;
      continue;
    }
    size_t k = std::upper_bound(nodes.begin(), nodes.end(), R) - nodes.begin();
    if (k == 0) k = 1;
    k = std::min(k, m - 1);
    size_t c = k - 1;  // cell [nodes[c], nodes[c+1]]
    CellInts ch = cell_ints(nodes[c], nodes[c + 1], h[c], h[c + 1], R);
    CellInts cg = cell_ints(nodes[c], nodes[c + 1], g[c], g[c + 1], R);
    double a = A[c] + ch.slogs, cc = C[c] + ch.s, d = D[c] + cg.s2, gg = G[c] + cg.one;
    out.phi[t] = alpha + a - std::log(R) * cc;
    out.E[t] = cc / R;
    out.psi[t] = beta * R + (d - R * R * gg) / (2 * R);
    out.B[t] = 2 * beta - gg;
  }
  return out;
}

namespace {

std::vector<double> picard_nodes(const RadialGrid& grid) { return grid.knots(); }

void finalize(Equilibrium& eq, const std::vector<double>& nodes, const std::vector<double>& h,
              const std::vector<double>& g, int spline_knots) {
  const int n = eq.grid.n;
  VolterraValues at = volterra_eval(nodes, h, g, eq.alpha, eq.beta, eq.grid.r);
  eq.phi0 = Eigen::Map<Eigen::VectorXd>(at.phi.data(), n);
  eq.psi0 = Eigen::Map<Eigen::VectorXd>(at.psi.data(), n);
  eq.E0r = Eigen::Map<Eigen::VectorXd>(at.E.data(), n);
  eq.B0 = Eigen::Map<Eigen::VectorXd>(at.B.data(), n);
  int N = spline_knots > 0 ? spline_knots : std::max(256, 4 * n);
  std::vector<double> uni(N + 1);
  for (int k = 0; k <= N; ++k) uni[k] = static_cast<double>(k) / N;
  VolterraValues u = volterra_eval(nodes, h, g, eq.alpha, eq.beta, uni);
  bool zero_h = std::all_of(h.begin(), h.end(), [](double x) { return x == 0.0; });
  bool zero_g = std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
  if (zero_h && eq.alpha == 0.0) std::fill(u.phi.begin(), u.phi.end(), 0.0);
  if (zero_g && eq.beta == 0.0) std::fill(u.psi.begin(), u.psi.end(), 0.0);
  double dphi1 = -u.E[N];
  double dpsi1 = u.B[N] - u.psi[N];
  eq.fields = FieldSpline(u.phi, u.psi, dphi1, dpsi1);

  // 3-point residual of the ODEs on interior nodes (diagnostic, O(h^2))
  if (eq.grid.scheme == GridScheme::FiniteDifference) {
    double hh = eq.grid.h, worst = 0;
    for (int i = 1; i + 1 < n; ++i) {
      double r = eq.grid.r[i];
      double rp = r + hh / 2, rm = r - hh / 2;
      double lphi = -(rp * (eq.phi0[i + 1] - eq.phi0[i]) - rm * (eq.phi0[i] - eq.phi0[i - 1])) / (r * hh * hh);
      double lpsi = -(rp * (eq.psi0[i + 1] - eq.psi0[i]) - rm * (eq.psi0[i] - eq.psi0[i - 1])) / (r * hh * hh) +
                    eq.psi0[i] / (r * r);
      worst = std::max({worst, std::abs(lphi - h[i + 1]), std::abs(lpsi - g[i + 1])});
    }
    eq.fd_residual = worst;
  }
}

struct QuadGuard {
  // rebuild the quadrature if iterates leave the certified shift range
  static VelocityQuad widen(const Profile& prof, const VelocityQuad& q, double phi, double psi) {
    VelocityQuadOptions o;
    o.tol = q.tol;
    o.level = q.level;
    o.phi_allow = std::max(q.phi_allow, 2 * phi);
    o.psi_allow = std::max(q.psi_allow, 2 * psi);
    return build_velocity_quad(prof, o);
  }
};

double sup_abs(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

Equilibrium homogeneous_equilibrium(const Profile& prof, const RadialGrid& grid, const VelocityQuad& quad) {
  Equilibrium eq;
  eq.grid = grid;
  eq.profile = prof;
  eq.quad = quad;
  eq.kind = "homogeneous";
  std::vector<double> nodes = picard_nodes(grid);
  std::vector<double> h(nodes.size()), g(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) {
    MomentPair m = moments(prof, quad, nodes[k], 0, 0);
    h[k] = m.h;
    g[k] = m.g;
  }
  eq.residual = std::max(sup_abs(h), sup_abs(g));
  if (eq.residual > 1e-13)
    eq.notes.push_back("profile does not admit the zero equilibrium: moments do not vanish");
  std::fill(h.begin(), h.end(), 0.0);
  std::fill(g.begin(), g.end(), 0.0);
  finalize(eq, nodes, h, g, 0);
  return eq;
}

Equilibrium solve_equilibrium(const Profile& prof, double alpha, double beta, const RadialGrid& grid,
                              const VelocityQuad& quad_in, const EquilibriumOptions& opt) {
  Equilibrium eq;
  eq.grid = grid;
  eq.profile = prof;
  eq.alpha = alpha;
  eq.beta = beta;
  eq.tol = opt.tol;
  eq.kind = "volterra";
  VelocityQuad quad = quad_in;
  std::vector<double> nodes = picard_nodes(grid);
  const size_t m = nodes.size();
  std::vector<double> phi(m), psi(m), h(m), g(m);
  for (size_t k = 0; k < m; ++k) {
    phi[k] = alpha;
    psi[k] = beta * nodes[k];
  }
  auto eval_moments = [&]() {
    double sp = sup_abs(phi), ss = sup_abs(psi);
    if (sp > quad.phi_allow || ss > quad.psi_allow) {
      quad = QuadGuard::widen(prof, quad, sp, ss);
      eq.notes.push_back("velocity quadrature widened for field shifts");
    }
    for (size_t k = 0; k < m; ++k) {
      MomentPair mp = moments(prof, quad, nodes[k], phi[k], psi[k]);
      h[k] = mp.h;
      g[k] = mp.g;
    }
  };
  double omega = 1.0, prev = -1;
  int bad = 0;
  eq.sup_phi_during = sup_abs(phi);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    eval_moments();
    VolterraValues nv = volterra_eval(nodes, h, g, alpha, beta, nodes);
    double upd = 0;
    for (size_t k = 0; k < m; ++k) upd = std::max({upd, std::abs(nv.phi[k] - phi[k]), std::abs(nv.psi[k] - psi[k])});
    eq.update_history.push_back(upd);
    if (prev > 0) {
      double ratio = upd / prev;
      eq.contraction = ratio;
      if (ratio > 0.9 && omega == 1.0) {
        omega = 0.5;
        eq.damped = true;
      }
      bad = (ratio >= 1.0) ? bad + 1 : 0;
      if (bad >= 5) {
        std::ostringstream os;
        os << "Picard iteration is not contracting: update ratio >= 1 for 5 consecutive iterations "
           << "(last ratio " << ratio << ", Lipschitz estimate " << ratio / omega
           << "); the small-data hypothesis on h, g (Lipschitz constant theta < 1) fails for this alpha, beta";
        throw Error("equilibrium", os.str());
      }
    }
    for (size_t k = 0; k < m; ++k) {
      phi[k] += omega * (nv.phi[k] - phi[k]);
      psi[k] += omega * (nv.psi[k] - psi[k]);
    }
    eq.sup_phi_during = std::max(eq.sup_phi_during, sup_abs(phi));
    prev = upd;
    if (upd <= opt.tol) {
      ++it;
      break;
    }
  }
  eq.iterations = it;
  if (eq.update_history.empty() || eq.update_history.back() > opt.tol) {
    std::ostringstream os;
    os << "Picard iteration did not reach tol " << opt.tol << " in " << opt.max_iter << " iterations";
    throw Error("equilibrium", os.str());
  }
  eq.lipschitz_estimate = eq.contraction / omega;
  // fixed-point residual with moments recomputed at the returned state
  eval_moments();
  VolterraValues fin = volterra_eval(nodes, h, g, alpha, beta, nodes);
  double res = 0;
  for (size_t k = 0; k < m; ++k) res = std::max({res, std::abs(fin.phi[k] - phi[k]), std::abs(fin.psi[k] - psi[k])});
  eq.residual = res;
  eq.quad = quad;
  finalize(eq, nodes, h, g, opt.spline_knots);
  return eq;
}

namespace {

// psi = T g: Volterra inverse of -Delta_r with psi(0) = psi(1) = 0 for piecewise-linear g
std::vector<double> dirichlet_inverse(const std::vector<double>& nodes, const std::vector<double>& g,
                                      double* beta_out = nullptr) {
  std::vector<double> zero(nodes.size(), 0.0);
  VolterraValues v = volterra_eval(nodes, zero, g, 0.0, 0.0, nodes);
  // psi(1) = beta + v.psi(1)
  double beta = -v.psi.back();
  if (beta_out) *beta_out = beta;
  std::vector<double> out(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) out[k] = beta * nodes[k] + v.psi[k];
  out.back() = 0.0;
  return out;
}

}  // namespace

Equilibrium solve_psi0_dirichlet(const Profile& prof, const RadialGrid& grid, const VelocityQuad& quad_in,
                                 const EquilibriumOptions& opt) {
  Equilibrium eq;
  eq.grid = grid;
  eq.profile = prof;
  eq.tol = opt.tol;
  eq.kind = "dirichlet";
  VelocityQuad quad = quad_in;
  std::vector<double> nodes = picard_nodes(grid);
  const size_t m = nodes.size();
  std::vector<double> psi(m, 0.0), g(m, 0.0), h(m, 0.0);
  auto eval_g = [&](const std::vector<double>& ps, std::vector<double>& out) {
    double ss = sup_abs(ps);
    if (ss > quad.psi_allow) {
      quad = QuadGuard::widen(prof, quad, 0.0, ss);
      eq.notes.push_back("velocity quadrature widened for field shifts");
    }
    for (size_t k = 0; k < m; ++k) out[k] = moments(prof, quad, nodes[k], 0.0, ps[k]).g;
  };

  double omega = 1.0, prev = -1;
  int bad = 0, it = 0;
  bool converged = false, diverged = false;
  std::string why;
  for (; it < opt.max_iter; ++it) {
    eval_g(psi, g);
    std::vector<double> nv = dirichlet_inverse(nodes, g);
    double upd = 0;
    for (size_t k = 0; k < m; ++k) upd = std::max(upd, std::abs(nv[k] - psi[k]));
    eq.update_history.push_back(upd);
    if (prev > 0) {
      double ratio = upd / prev;
      eq.contraction = ratio;
      if (ratio > 0.9 && omega == 1.0) {
        omega = 0.5;
        eq.damped = true;
      }
      bad = (ratio >= 1.0) ? bad + 1 : 0;
      if (bad >= 5) {
        std::ostringstream os;
        os << "damped Picard not contracting (ratio " << ratio << ", Lipschitz estimate " << ratio / omega << ")";
        why = os.str();
        diverged = true;
        break;
      }
    }
    for (size_t k = 0; k < m; ++k) psi[k] += omega * (nv[k] - psi[k]);
    prev = upd;
    if (upd <= opt.tol) {
      converged = true;
      ++it;
      break;
    }
  }
  eq.iterations = it;
  eq.lipschitz_estimate = eq.contraction / omega;
  if (!converged) {
    if (!diverged) why = "damped Picard did not reach tolerance within max_iter";
    if (!opt.allow_newton_fallback) throw Error("equilibrium", why + "; non-contraction of the fixed-point map");
    eq.notes.push_back(why + "; switched to Newton");
    // Newton on F(psi) = psi - T g(psi), T linear
    const int nn = static_cast<int>(m);
    Eigen::MatrixXd T(nn, nn);
    {
      std::vector<double> e(m, 0.0);
      for (int j = 0; j < nn; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        std::vector<double> col = dirichlet_inverse(nodes, e);
        for (int i = 0; i < nn; ++i) T(i, j) = col[i];
      }
    }
    std::fill(psi.begin(), psi.end(), 0.0);
    auto residual_of = [&](const std::vector<double>& ps, Eigen::VectorXd& F) {
      std::vector<double> gg(m);
      eval_g(ps, gg);
      std::vector<double> tg = dirichlet_inverse(nodes, gg);
      F.resize(nn);
      for (int k = 0; k < nn; ++k) F[k] = ps[k] - tg[k];
      return F.cwiseAbs().maxCoeff();
    };
    Eigen::VectorXd F;
    double fn = residual_of(psi, F);
    int nit = 0;
    converged = false;
    for (; nit < 60; ++nit) {
      if (fn <= opt.tol) {
        converged = true;
        break;
      }
      Eigen::VectorXd dg(nn);
      for (int k = 0; k < nn; ++k) {
        double d = 1e-6 * (1 + std::abs(psi[k]));
        double hi = moments(prof, quad, nodes[k], 0.0, std::min(psi[k] + d, quad.psi_allow)).g;
        double lo = moments(prof, quad, nodes[k], 0.0, std::max(psi[k] - d, -quad.psi_allow)).g;
        dg[k] = (hi - lo) / (std::min(psi[k] + d, quad.psi_allow) - std::max(psi[k] - d, -quad.psi_allow));
      }
      Eigen::MatrixXd J = Eigen::MatrixXd::Identity(nn, nn) - T * dg.asDiagonal();
      J.row(0).setZero();
      J(0, 0) = 1;
      J.row(nn - 1).setZero();
      J(nn - 1, nn - 1) = 1;
      Eigen::VectorXd rhs = -F;
      rhs[0] = -psi[0];
      rhs[nn - 1] = -psi[nn - 1];
      Eigen::VectorXd step = J.partialPivLu().solve(rhs);
      double t = 1.0;
      std::vector<double> trial(m);
      Eigen::VectorXd Ft;
      double ft = fn;
      for (int ls = 0; ls < 30; ++ls) {
        for (int k = 0; k < nn; ++k) trial[k] = psi[k] + t * step[k];
        ft = residual_of(trial, Ft);
        if (ft < (1 - 1e-4 * t) * fn) break;
        t *= 0.5;
      }
      psi = trial;
      F = Ft;
      fn = ft;
    }
    eq.iterations += nit;
    eq.method = "newton";
    if (!converged) throw Error("equilibrium", why + "; Newton fallback also failed (residual " + std::to_string(fn) + ")");
  }
  eval_g(psi, g);
  double beta = 0;
  std::vector<double> fin = dirichlet_inverse(nodes, g, &beta);
  double res = 0;
  for (size_t k = 0; k < m; ++k) res = std::max(res, std::abs(fin[k] - psi[k]));
  eq.residual = res;
  eq.beta = beta;
  eq.alpha = 0;
  eq.quad = quad;
  finalize(eq, nodes, h, g, opt.spline_knots);
  return eq;
}

FieldSamples fields(const Equilibrium& eq) { return {eq.E0r, eq.B0}; }

NewtonCheck newton_crosscheck(const Equilibrium& eq, double tol, int max_iter) {
  const RadialGrid& G = eq.grid;
  if (G.scheme != GridScheme::FiniteDifference) throw Error("equilibrium", "Newton check needs the FD grid");
  const int n = G.n;
  const double hh = G.h;
  const double phib = eq.Phi(1.0), psib = eq.S(1.0);
  NewtonCheck out;
  Eigen::VectorXd x(2 * n);
  for (int i = 0; i < n; ++i) {
    x[i] = eq.alpha;
    x[n + i] = eq.beta * G.r[i];
  }
  auto residual = [&](const Eigen::VectorXd& y, Eigen::VectorXd& F, Eigen::MatrixXd* J) {
    F.resize(2 * n);
    if (J) J->setZero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
      double r = G.r[i];
      double rm = (i == 0) ? 0.0 : r - hh / 2, rp = r + hh / 2;
      double c = 1.0 / (r * hh * hh);
      auto lap = [&](int off, double bval, bool radial, double& diag, double& lo, double& hi, double& cst) {
        double ym = (i == 0) ? 0.0 : y[off + i - 1];
        double yp = (i == n - 1) ? (2 * bval - y[off + i]) : y[off + i + 1];
        double val = -c * (rp * (yp - y[off + i]) - rm * (y[off + i] - ym));
        diag = c * (rp + rm) + (i == n - 1 ? c * rp : 0.0);
        lo = (i == 0) ? 0.0 : -c * rm;
        hi = (i == n - 1) ? 0.0 : -c * rp;
        cst = 0;
        if (radial) {
          val += y[off + i] / (r * r);
          diag += 1.0 / (r * r);
        }
        return val;
      };
      double d1, l1, h1, c1, d2, l2, h2, c2;
      double L1 = lap(0, phib, false, d1, l1, h1, c1);
      double L2 = lap(n, psib, true, d2, l2, h2, c2);
      MomentPair mp = moments(eq.profile, eq.quad, r, y[i], y[n + i]);
      F[i] = L1 - mp.h;
      F[n + i] = L2 - mp.g;
      if (J) {
        double dp = 1e-7 * (1 + std::abs(y[i])), ds = 1e-7 * (1 + std::abs(y[n + i]));
        MomentPair a = moments(eq.profile, eq.quad, r, y[i] + dp, y[n + i]);
        MomentPair b = moments(eq.profile, eq.quad, r, y[i] - dp, y[n + i]);
        MomentPair c3 = moments(eq.profile, eq.quad, r, y[i], y[n + i] + ds);
        MomentPair d3 = moments(eq.profile, eq.quad, r, y[i], y[n + i] - ds);
        (*J)(i, i) = d1 - (a.h - b.h) / (2 * dp);
        (*J)(i, n + i) = -(c3.h - d3.h) / (2 * ds);
        (*J)(n + i, i) = -(a.g - b.g) / (2 * dp);
        (*J)(n + i, n + i) = d2 - (c3.g - d3.g) / (2 * ds);
        if (i > 0) {
          (*J)(i, i - 1) = l1;
          (*J)(n + i, n + i - 1) = l2;
        }
        if (i < n - 1) {
          (*J)(i, i + 1) = h1;
          (*J)(n + i, n + i + 1) = h2;
        }
      }
    }
    return F.cwiseAbs().maxCoeff();
  };
  Eigen::VectorXd F;
  Eigen::MatrixXd J;
  double fn = residual(x, F, &J);
  int it = 0;
  for (; it < max_iter && fn > tol; ++it) {
    Eigen::VectorXd step = J.partialPivLu().solve(-F);
    double t = 1.0;
    Eigen::VectorXd trial, Ft;
    double ft = fn;
    for (int ls = 0; ls < 30; ++ls) {
      trial = x + t * step;
      ft = residual(trial, Ft, nullptr);
      if (ft < (1 - 1e-4 * t) * fn) break;
      t *= 0.5;
    }
    x = trial;
    fn = residual(x, F, &J);
  }
  out.iterations = it;
  out.residual = fn;
  out.converged = fn <= std::max(tol, 1e-10);
  out.phi = x.head(n);
  out.psi = x.tail(n);
  out.max_diff = std::max((out.phi - eq.phi0).cwiseAbs().maxCoeff(), (out.psi - eq.psi0).cwiseAbs().maxCoeff());
  return out;
}

}  // namespace vmstab
