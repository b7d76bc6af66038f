#include "vmstab/operators.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "vmstab/common.hpp"

namespace vmstab {

ProjectionMode parse_projection_mode(const std::string& s) {
  if (s == "auto") return ProjectionMode::Auto;
  if (s == "explicit") return ProjectionMode::Explicit;
  if (s == "orbit") return ProjectionMode::Orbit;
  throw ConfigError("unknown projection mode '" + s + "' (auto|explicit|orbit)");
}

std::string to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::Auto: return "auto";
    case ProjectionMode::Explicit: return "explicit";
    case ProjectionMode::Orbit: return "orbit";
  }
  return "?";
}

namespace {

double rel_asym(const Eigen::MatrixXd& F) {
  double n = F.norm();
  return n > 0 ? (F - F.transpose()).norm() / n : 0.0;
}

struct ExplicitMoments {
  Eigen::VectorXd m, loc, beta;
  Eigen::MatrixXd gamma;  // n x 2
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
};

// velocity moments at the nodes for the closed-form projections
ExplicitMoments explicit_moments(const Equilibrium& eq) {
  const RadialGrid& g = eq.grid;
  const VelocityQuad& q = eq.quad;
  const int n = g.n;
  ExplicitMoments out;
  out.m = Eigen::VectorXd::Zero(n);
  out.loc = Eigen::VectorXd::Zero(n);
  out.beta = Eigen::VectorXd::Zero(n);
  out.gamma = Eigen::MatrixXd::Zero(n, 2);
  for (int i = 0; i < n; ++i) {
    double r = g.r[i];
    for (int sigma : {1, -1}) {
      double ph = eq.phi0[i], S = eq.psi0[i];
      double m = 0, loc = 0, beta = 0, g1 = 0, g2 = 0, G11 = 0, G12 = 0, G22 = 0;
      for (size_t k = 0; k < q.size(); ++k) {
        double gam = momentum_factor(q.vr[k], q.vt[k]);
        double vth = q.vt[k] / gam;
        double e = gam + sigma * ph, p = r * (q.vt[k] + sigma * S);
        MuEval mu = eq.profile.eval(sigma, e, p);
        double w = q.w[k];
        double c1 = 2 * p / gam, c2 = -2.0 * sigma / gam;
        m += w * mu.mu_e;
        loc += w * r * vth * mu.mu_p;
        beta += w * mu.mu_e * vth;
        g1 += w * mu.mu_e * c1;
        g2 += w * mu.mu_e * c2;
        G11 += w * mu.mu_e * c1 * c1;
        G12 += w * mu.mu_e * c1 * c2;
        G22 += w * mu.mu_e * c2 * c2;
      }
      out.m[i] += m;
      out.loc[i] += loc;
      out.beta[i] += beta;
      out.gamma(i, 0) += g1;
      out.gamma(i, 1) += g2;
      out.G(0, 0) += g.w[i] * G11;
      out.G(0, 1) += g.w[i] * G12;
      out.G(1, 1) += g.w[i] * G22;
    }
  }
  out.G(1, 0) = out.G(0, 1);
  return out;
}

}  // namespace

OperatorSet assemble_operators(const Equilibrium& eq, double lambda, const OperatorOptions& opt) {
  if (!(lambda >= 0)) throw Error("operators", "lambda must be >= 0");
  auto t0 = std::chrono::steady_clock::now();
  const RadialGrid& g = eq.grid;
  const int n = g.n;
  const Eigen::VectorXd w = g.weights();
  const Eigen::MatrixXd W = w.asDiagonal();
  OperatorSet ops;
  ops.lambda = lambda;
  ops.grid = g;
  ops.diag.quad_tail = eq.quad.tail_estimate;

  bool use_explicit = false;
  switch (opt.projection) {
    case ProjectionMode::Explicit:
      if (lambda != 0) throw Error("operators", "explicit projections exist only at lambda = 0");
      if (!eq.purely_magnetic()) throw Error("operators", "explicit projections need E0 = 0");
      use_explicit = true;
      break;
    case ProjectionMode::Auto: use_explicit = lambda == 0 && eq.purely_magnetic(); break;
    case ProjectionMode::Orbit: use_explicit = false; break;
  }

  const Eigen::MatrixXd lapN = laplacian_neumann(g).M;
  const Eigen::MatrixXd lapD = laplacian_r_dirichlet(g).M;
  Eigen::MatrixXd Pi = Eigen::MatrixXd::Identity(n, n) - Eigen::VectorXd::Ones(n) * w.transpose() / kPi;

  Eigen::MatrixXd WA1 = W * lapN, WA2 = W * lapD, WB, WBs;
  ops.Nfp = Eigen::MatrixXd::Zero(n, n);
  ops.Mfp = Eigen::MatrixXd::Zero(n, n);
  if (lambda > 0) WA2 += lambda * lambda * W;

  if (eq.profile.vacuum()) {
    ops.diag.strategy = "vacuum";
    WB = Eigen::MatrixXd::Zero(n, n);
    WBs = WB;
    ops.Kpp = Eigen::MatrixXd::Zero(n, n);
  } else if (use_explicit) {
    ops.diag.strategy = eq.homogeneous() ? "homogeneous-explicit" : "purely-magnetic-explicit";
    ExplicitMoments mo = explicit_moments(eq);
    Eigen::MatrixXd ell(n, 2);
    ell.col(0) = integral_dr_dirichlet_weights(g);
    ell.col(1) = integral_dr_dirichlet_weights(g).cwiseProduct(g.nodes()).cwiseProduct(eq.psi0);
    WA1 -= Pi.transpose() * W * mo.m.asDiagonal() * Pi;
    ops.Kpp = ell * mo.G * ell.transpose();
    WA2 -= W * mo.loc.asDiagonal();
    WA2 -= ops.Kpp;
    Eigen::MatrixXd inner = Eigen::MatrixXd(mo.beta.asDiagonal()) - mo.gamma * ell.transpose();
    WB = -(W * Pi * inner);
    WBs = WB.transpose();
    Eigen::MatrixXd Bs = w.cwiseInverse().asDiagonal() * WBs;
    Eigen::MatrixXd formula = -(mo.beta.asDiagonal() * Pi);
    double nb = Bs.norm();
    ops.diag.formula_Bstar = nb > 0 ? (Bs - formula).norm() / nb : formula.norm();
  } else {
    ops.diag.strategy = "orbit";
    OrbitForms F = assemble_orbit_forms(eq, lambda, opt.orbit);
    ops.diag.kernel_defect = F.raw_symmetry_defect;
    ops.diag.orbits = F.orbits;
    if (F.raw_symmetry_defect > opt.symmetry_gate) {
      std::ostringstream os;
      os << "orbit kernel symmetry defect " << F.raw_symmetry_defect << " exceeds " << opt.symmetry_gate;
      throw Error("operators", os.str());
    }
    const Eigen::MatrixXd D = F.M - F.K;
    WA1 -= D.topLeftCorner(n, n);
    ops.Kpp = F.K.bottomRightCorner(n, n);
    WA2 -= F.Npp;
    WA2 -= ops.Kpp;
    WB = -D.topRightCorner(n, n);
    WBs = -D.bottomLeftCorner(n, n);
    ops.Nfp = F.Nfp;
    ops.Mfp = F.M.topRightCorner(n, n);
  }

  ops.diag.defect_A1 = rel_asym(WA1);
  ops.diag.defect_A2 = rel_asym(WA2);
  {
    double nb = WB.norm();
    ops.diag.defect_Bstar = nb > 0 ? (WBs - WB.transpose()).norm() / nb : 0.0;
  }
  if (ops.diag.defect_A1 > opt.symmetry_gate || ops.diag.defect_A2 > opt.symmetry_gate) {
    std::ostringstream os;
    os << "symmetry defect above gate: A1 " << ops.diag.defect_A1 << ", A2 " << ops.diag.defect_A2;
    throw Error("operators", os.str());
  }
  WA1 = 0.5 * (WA1 + WA1.transpose());
  WA2 = 0.5 * (WA2 + WA2.transpose());
  WBs = 0.5 * (WBs + WB.transpose());
  WB = WBs.transpose();

  Eigen::MatrixXd Winv = w.cwiseInverse().asDiagonal();
  ops.WA1 = WA1;
  ops.WA2 = WA2;
  ops.WB = WB;
  ops.A1 = {Winv * WA1, BoundaryKind::NeumannZeroMean, lambda, "A1"};
  ops.A2 = {Winv * WA2, BoundaryKind::Dirichlet, lambda, "A2"};
  ops.B = {Winv * WB, BoundaryKind::NeumannZeroMean, lambda, "B"};
  ops.Bstar = {Winv * WBs, BoundaryKind::Dirichlet, lambda, "Bstar"};

  {
    Eigen::VectorXd avg = w.transpose() * ops.B.M / kPi;
    double scale = std::max(1.0, ops.B.M.cwiseAbs().maxCoeff());
    ops.diag.B_column_average = n ? avg.cwiseAbs().maxCoeff() / scale : 0.0;
    double na = ops.A1.M.norm();
    ops.diag.A1_kernel_residual = na > 0 ? (ops.A1.M * Eigen::VectorXd::Ones(n)).norm() / na : 0.0;
  }

  Eigen::MatrixXd defl = WA1 + w * w.transpose() / kPi;
  ops.A1_deflated.compute(defl);
  if (ops.A1_deflated.info() != Eigen::Success) throw Error("operators", "deflated A1 factorization failed");
  {
    Eigen::VectorXd d = ops.A1_deflated.vectorD();
    double dmin = d.cwiseAbs().minCoeff(), dmax = d.cwiseAbs().maxCoeff();
    ops.diag.A1_condition = dmin > 0 ? dmax / dmin : INFINITY;
    if (!(dmin > 0) || (d.array() <= 0).any()) {
      std::ostringstream os;
      os << "A1 restricted to zero-mean functions is not positive (condition estimate " << ops.diag.A1_condition
         << ")";
      throw Error("operators", os.str());
    }
  }
  Eigen::MatrixXd X = ops.A1_deflated.solve(WB);
  Eigen::MatrixXd WL = WA2 + WB.transpose() * X;
  ops.diag.defect_L = rel_asym(WL);
  WL = 0.5 * (WL + WL.transpose());
  ops.WL = WL;
  ops.L = {Winv * WL, BoundaryKind::Dirichlet, lambda, "L"};
  ops.diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ops;
}

Eigen::VectorXd solve_A1(const OperatorSet& ops, const Eigen::VectorXd& f) {
  const Eigen::VectorXd w = ops.grid.weights();
  Eigen::VectorXd rhs = w.cwiseProduct(f);
  rhs -= w * (rhs.sum() / w.sum());
  Eigen::VectorXd phi = ops.A1_deflated.solve(rhs);
  phi.array() -= w.dot(phi) / w.sum();
  return phi;
}

double minimized_J(const OperatorSet& ops0, const Eigen::VectorXd& psi) {
  if (ops0.lambda != 0) throw Error("operators", "minimized_J needs the lambda = 0 operators");
  Eigen::VectorXd Bpsi = ops0.WB * psi;
  Eigen::VectorXd phi = ops0.A1_deflated.solve(Bpsi);
  return Bpsi.dot(phi) - psi.dot(ops0.Kpp * psi);
}

void dump_matrix(std::ostream& os, const std::string& name, const RadialOperator& op) {
  const Eigen::Index n = op.M.rows();
  os << "# " << name << " n " << n << " lambda " << std::setprecision(17) << op.lambda << " tag " << op.tag << "\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < op.M.cols(); ++j) os << (j ? " " : "") << op.M(i, j);
    os << "\n";
  }
}

}  // namespace vmstab
