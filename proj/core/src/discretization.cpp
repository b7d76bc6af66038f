#include "vmstab/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vmstab/common.hpp"
#include "vmstab/quadrature.hpp"

namespace vmstab {

std::vector<double> RadialGrid::knots() const {
  std::vector<double> k;
  k.reserve(n + 2);
  k.push_back(0.0);
  for (double x : r) k.push_back(x);
  k.push_back(1.0);
  return k;
}

double RadialGrid::integrate(const Eigen::VectorXd& f) const {
  double s = 0;
  for (int i = 0; i < n; ++i) s += w[i] * f[i];
  return s;
}

double RadialGrid::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  double s = 0;
  for (int i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

RadialGrid build_grid(int n, GridScheme scheme) {
  if (n < 8) throw Error("discretization", "build_grid: n must be >= 8");
  RadialGrid g;
  g.n = n;
  g.scheme = scheme;
  g.r.resize(n);
  g.w.resize(n);
  if (scheme == GridScheme::FiniteDifference) {
    g.h = 1.0 / n;
    for (int i = 0; i < n; ++i) {
      g.r[i] = (i + 0.5) * g.h;
      g.w[i] = 2 * kPi * g.r[i] * g.h;
    }
  } else {
    std::vector<double> x, w;
    gauss_on(n, 0.0, 1.0, x, w);
    for (int i = 0; i < n; ++i) {
      g.r[i] = x[i];
      g.w[i] = 2 * kPi * x[i] * w[i];
    }
    g.h = 1.0 / n;
  }
  return g;
}

double symmetry_defect(const RadialGrid& g, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd WM = g.weights().asDiagonal() * M;
  double nrm = WM.norm();
  if (nrm == 0) return 0;
  return (WM - WM.transpose()).norm() / nrm;
}

Eigen::MatrixXd weighted_adjoint(const RadialGrid& g, const Eigen::MatrixXd& M) {
  Eigen::VectorXd w = g.weights();
  return w.cwiseInverse().asDiagonal() * M.transpose() * w.asDiagonal();
}

Eigen::MatrixXd symmetrize(const RadialGrid& g, const Eigen::MatrixXd& M) {
  return 0.5 * (M + weighted_adjoint(g, M));
}

static void require_fd(const RadialGrid& g) {
  if (g.scheme != GridScheme::FiniteDifference)
    throw Error("discretization", "Laplacians are defined on the staggered finite-difference grid only");
}

RadialOperator laplacian_neumann(const RadialGrid& g) {
  require_fd(g);
  const int n = g.n;
  const double h = g.h;
  RadialOperator op;
  op.M = Eigen::MatrixXd::Zero(n, n);
  op.bc = BoundaryKind::NeumannZeroMean;
  op.tag = "-Laplacian (Neumann)";
  for (int i = 0; i < n; ++i) {
    double ri = g.r[i];
    double rm = (i == 0) ? 0.0 : ri - 0.5 * h;
    double rp = (i == n - 1) ? 0.0 : ri + 0.5 * h;  // zero flux at r = 1
    double c = 1.0 / (ri * h * h);
    op.M(i, i) = c * (rm + rp);
    if (i > 0) op.M(i, i - 1) = -c * rm;
    if (i < n - 1) op.M(i, i + 1) = -c * rp;
  }
  return op;
}

RadialOperator laplacian_r_dirichlet(const RadialGrid& g) {
  require_fd(g);
  const int n = g.n;
  const double h = g.h;
  RadialOperator op;
  op.M = Eigen::MatrixXd::Zero(n, n);
  op.bc = BoundaryKind::Dirichlet;
  op.tag = "-Laplacian_r (Dirichlet)";
  for (int i = 0; i < n; ++i) {
    double ri = g.r[i];
    double rm = (i == 0) ? 0.0 : ri - 0.5 * h;
    double rp = ri + 0.5 * h;
    double c = 1.0 / (ri * h * h);
    op.M(i, i) = c * (rm + rp) + 1.0 / (ri * ri);
    if (i > 0) op.M(i, i - 1) = -c * rm;
    if (i < n - 1) op.M(i, i + 1) = -c * rp;
  }
  // ghost psi_{n+1} = -psi_n puts the zero at r = 1
  {
    double ri = g.r[n - 1];
    op.M(n - 1, n - 1) += (ri + 0.5 * h) / (ri * h * h);
  }
  return op;
}

int knot_cell(const RadialGrid& g, double r) {
  const int n = g.n;
  if (r <= g.r[0]) return 0;
  if (r >= g.r[n - 1]) return n;
  if (g.scheme == GridScheme::FiniteDifference) {
    int c = static_cast<int>(std::floor(r / g.h + 0.5));
    c = std::clamp(c, 1, n - 1);
    // guard rounding at knots
    while (c > 1 && r < g.r[c - 1]) --c;
    while (c < n - 1 && r > g.r[c]) ++c;
    return c;
  }
  auto it = std::upper_bound(g.r.begin(), g.r.end(), r);
  return static_cast<int>(it - g.r.begin());
}

HatWeights hat_neumann(const RadialGrid& g, int cell, double r) {
  const int n = g.n;
  HatWeights hw;
  if (cell <= 0) {
    hw.i0 = 0;
    hw.a0 = 1;
  } else if (cell >= n) {
    hw.i0 = n - 1;
    hw.a0 = 1;
  } else {
    double a = g.r[cell - 1], b = g.r[cell];
    double t = (r - a) / (b - a);
    hw.i0 = cell - 1;
    hw.a0 = 1 - t;
    hw.i1 = cell;
    hw.a1 = t;
  }
  return hw;
}

HatWeights hat_dirichlet(const RadialGrid& g, int cell, double r) {
  const int n = g.n;
  HatWeights hw;
  if (cell <= 0) {
    hw.i0 = 0;
    hw.a0 = r / g.r[0];
  } else if (cell >= n) {
    hw.i0 = n - 1;
    hw.a0 = (1 - r) / (1 - g.r[n - 1]);
  } else {
    double a = g.r[cell - 1], b = g.r[cell];
    double t = (r - a) / (b - a);
    hw.i0 = cell - 1;
    hw.a0 = 1 - t;
    hw.i1 = cell;
    hw.a1 = t;
  }
  return hw;
}

static double apply_hat(const HatWeights& hw, const Eigen::VectorXd& v) {
  double s = hw.a0 * v[hw.i0];
  if (hw.i1 >= 0) s += hw.a1 * v[hw.i1];
  return s;
}

double interp_neumann(const RadialGrid& g, const Eigen::VectorXd& v, double r) {
  return apply_hat(hat_neumann(g, knot_cell(g, r), r), v);
}

double interp_dirichlet(const RadialGrid& g, const Eigen::VectorXd& v, double r) {
  return apply_hat(hat_dirichlet(g, knot_cell(g, r), r), v);
}

Eigen::VectorXd integral_dr_dirichlet_weights(const RadialGrid& g) {
  const int n = g.n;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c[0] += 0.5 * g.r[0];
  c[n - 1] += 0.5 * (1 - g.r[n - 1]);
  for (int i = 0; i + 1 < n; ++i) {
    double d = g.r[i + 1] - g.r[i];
    c[i] += 0.5 * d;
    c[i + 1] += 0.5 * d;
  }
  return c;
}

double integral_dr_dirichlet(const RadialGrid& g, const Eigen::VectorXd& v) {
  return integral_dr_dirichlet_weights(g).dot(v);
}

// ---------------------------------------------------------------- velocity quadrature

namespace {

// envelope sup_{p, shift} |mu_e| at speed s
double envelope(const Profile& prof, double s, double phi, double psi) {
  double e0 = std::sqrt(1 + s * s);
  double pmax = s + psi;
  double best = 0;
  const int np = 41;
  for (double sh : {-phi, 0.0, phi}) {
    for (int j = 0; j < np; ++j) {
      double p = -pmax + 2 * pmax * j / (np - 1);
      for (int sg : {1, -1}) best = std::max(best, std::abs(prof.eval(sg, e0 + sh, p).mu_e));
    }
  }
  return best;
}

double envelope_integral(const Profile& prof, double a, double b, double phi, double psi) {
  std::vector<double> x, w;
  gauss_on(16, a, b, x, w);
  double s = 0;
  for (int i = 0; i < 16; ++i) s += w[i] * x[i] * envelope(prof, x[i], phi, psi);
  return 2 * kPi * s;
}

// integral from a to infinity, doubling panels until they stop contributing
double envelope_tail(const Profile& prof, double a, double phi, double psi) {
  double total = 0;
  double lo = a, width = std::max(1.0, a);
  for (int k = 0; k < 60; ++k) {
    double piece = envelope_integral(prof, lo, lo + width, phi, psi);
    total += piece;
    if (piece <= 1e-16 * total || piece == 0) break;
    lo += width;
    width *= 2;
  }
  return total;
}

}  // namespace

VelocityQuad build_velocity_quad(const Profile& prof, const VelocityQuadOptions& opt) {
  if (!(opt.tol > 0)) throw Error("discretization", "velocity quadrature tolerance must be > 0");
  if (opt.level < 0 || opt.level > 6) throw Error("discretization", "velocity quadrature level must be in [0,6]");
  VelocityQuad q;
  q.tol = opt.tol;
  q.level = opt.level;
  q.phi_allow = opt.phi_allow;
  q.psi_allow = opt.psi_allow;

  double total = envelope_tail(prof, 0.0, opt.phi_allow, opt.psi_allow);
  double vmax = 4.0;
  if (opt.vmax_override > 0) {
    vmax = opt.vmax_override;
    q.tail_estimate = total > 0 ? envelope_tail(prof, vmax, opt.phi_allow, opt.psi_allow) / total : 0.0;
  } else if (total > 0) {
    for (;;) {
      double t = envelope_tail(prof, vmax, opt.phi_allow, opt.psi_allow) / total;
      if (t <= opt.tol) {
        q.tail_estimate = t;
        break;
      }
      vmax *= 1.1;
      if (vmax > opt.vmax_cap) {
        std::ostringstream os;
        os << "velocity tail " << t << " still above tolerance " << opt.tol << " at |v| = " << opt.vmax_cap;
        throw Error("discretization", os.str());
      }
    }
  }
  q.vmax = vmax;
  if (total > 0 && prof.C_mu() > 0) {
    double g = prof.gamma();
    q.tail_algebraic = 2 * kPi * prof.C_mu() * std::pow(std::max(vmax - opt.phi_allow, 1.0), 2 - g) / (g - 2) / total;
  }

  // radial panels: [0,1],[1,2],[2,4],[4,8],... clipped at vmax, each split 2^level times
  std::vector<double> edges{0.0};
  double b = 1.0;
  while (b < vmax) {
    edges.push_back(b);
    b *= 2;
  }
  edges.push_back(vmax);
  const int per = 8;
  const int split = 1 << opt.level;
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    double a0 = edges[k], a1 = edges[k + 1];
    for (int s = 0; s < split; ++s) {
      double lo = a0 + (a1 - a0) * s / split, hi = a0 + (a1 - a0) * (s + 1) / split;
      std::vector<double> x, w;
      gauss_on(per, lo, hi, x, w);
      for (int i = 0; i < per; ++i) {
        q.speed.push_back(x[i]);
        q.speed_w.push_back(w[i]);
      }
    }
  }
  // angular resolution grows with speed: profiles depending on p = r v_theta narrow in angle
  q.n_angle = 0;
  const double ms = prof.params.count("momentum_scale") ? std::max(1.0, prof.params.at("momentum_scale")) : 1.0;
  for (size_t k = 0; k < q.speed.size(); ++k) {
    double s = q.speed[k];
    const int quarter = split * std::max(4, static_cast<int>(std::ceil(1.5 * s * ms)));
    q.n_angle = std::max(q.n_angle, 4 * quarter);
    const double dth = 0.5 * kPi / quarter;
    double wk = q.speed_w[k] * s * dth;
    for (int j = 0; j < quarter; ++j) {
      double th = (j + 0.5) * dth;
      double c = s * std::cos(th), sn = s * std::sin(th);
      const double vrs[4] = {c, -c, c, -c};
      const double vts[4] = {sn, sn, -sn, -sn};
      for (int m = 0; m < 4; ++m) {
        q.vr.push_back(vrs[m]);
        q.vt.push_back(vts[m]);
        q.w.push_back(wk);
      }
    }
  }
  return q;
}

}  // namespace vmstab
