// Acceptance criteria 1-10. Usage: vmstab_acceptance [N ...]   (no arguments: all)
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <vmstab/common.hpp>
#include <vmstab/discretization.hpp>
#include <vmstab/equilibrium.hpp>
#include <vmstab/kernelproj.hpp>
#include <vmstab/operators.hpp>
#include <vmstab/stability.hpp>
#include <vmstab/trajectories.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

// 1. smallest Dirichlet eigenvalue of -Delta_r vs j11^2
Outcome c1() {
  RadialGrid g = build_grid(128);
  Eigen::MatrixXd M = laplacian_r_dirichlet(g).M;
  Eigen::VectorXd s = g.weights().cwiseSqrt();
  Eigen::MatrixXd S = s.asDiagonal() * M * s.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose());
  double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  double ref = std::pow(oracle::j11(), 2);
  double rel = std::abs(ev - ref) / ref;
  return {rel <= 0.01, "lambda_1 = " + fmt(ev) + ", j11^2 = " + fmt(ref) + ", rel " + fmt(rel)};
}

// 2. invariants along 100 random characteristics in a purely magnetic equilibrium
Outcome c2() {
  Equilibrium eq = volterra(make_profile("damped"), 64, 0.0, 0.5);
  double worst_e = 0, worst_p = 0;
  int min_refl = 1 << 30;
  TrajectoryOptions opt;
  opt.record = true;
  for (unsigned seed = 0; seed < 100; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    PhasePoint z;
    z.r = 0.05 + 0.9 * U(rng);
    // fast enough to reach the wall: |v| in [1, 3]
    double sp = 1.0 + 2.0 * U(rng), th = 2 * kPi * U(rng);
    z.vr = sp * std::cos(th);
    z.vt = sp * std::sin(th);
    int sigma = seed % 2 ? -1 : 1;
    Trajectory t = integrate(eq, sigma, z, -50.0, opt);
    worst_e = std::max(worst_e, t.e_drift);
    worst_p = std::max(worst_p, t.p_drift);
    min_refl = std::min(min_refl, t.reflections);
  }
  bool ok = worst_e <= 1e-8 && worst_p <= 1e-8 && min_refl >= 5;
  return {ok, "max |de| = " + fmt(worst_e) + ", max |dp| = " + fmt(worst_p) + ", min reflections " +
                  std::to_string(min_refl) + ", sup|psi0| = " + fmt(eq.sup_psi())};
}

// 3. Q(1) = 1 and Q_lambda(vhat_theta psi) -> 2 r vhat_theta psi_R in the homogeneous case
Outcome c3() {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 32);
  const std::vector<double> lams{1.0, 0.3, 0.1, 0.03};
  double q1 = 0;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  PhaseFn one = [](const PhasePoint&) { return 1.0; };
  for (int k = 0; k < 8; ++k) {
    PhasePoint z{0.05 + 0.9 * U(rng), 3 * (U(rng) - 0.5), 3 * (U(rng) - 0.5)};
    for (double l : lams) q1 = std::max(q1, std::abs(q_lambda(eq, 1, l, one, z).value - 1.0));
  }

  auto psi_fn = [](double r) { return r * (1 - r); };
  Eigen::VectorXd psi(eq.grid.n);
  for (int i = 0; i < eq.grid.n; ++i) psi[i] = psi_fn(eq.grid.r[i]);
  PhaseFn g = [&](const PhasePoint& z) { return z.vt / momentum_factor(z.vr, z.vt) * psi_fn(z.r); };
  PhaseSamples ps = phase_samples(eq, 1, 12);
  Eigen::VectorXd P = sample(ps, project_vtheta_homogeneous(eq, psi));
  Eigen::VectorXd G = sample(ps, g);
  // reference only: straight-line orbits keep r vhat_theta, so the exact orbit average is a chord average
  Eigen::VectorXd O(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    const PhasePoint& z = ps.z[i];
    double L = z.r * z.vt / momentum_factor(z.vr, z.vt);
    double b = z.r * std::abs(z.vt) / std::hypot(z.vr, z.vt);
    O[i] = L * oracle::chord_average([&](double r) { return psi_fn(r) / r; }, b);
  }
  std::vector<double> err;
  std::string s, so;
  for (double l : lams) {
    Eigen::VectorXd Q = q_on_samples(eq, ps, l, g);
    err.push_back(h_norm(ps, Q - P) / h_norm(ps, G));
    s += " " + fmt(err.back());
    so += " " + fmt(h_norm(ps, Q - O) / h_norm(ps, G));
  }
  bool mono = true;
  for (size_t i = 1; i < err.size(); ++i) mono = mono && err[i] < err[i - 1];
  bool ok = q1 <= 1e-10 && mono && err.back() <= 0.05;
  return {ok, "max |Q(1) - 1| = " + fmt(q1) + "; relative H error at lambda = 1, 0.3, 0.1, 0.03:" + s +
                  (mono ? " (monotone)" : " (not monotone)") + "; vs chord-average orbit mean:" + so};
}

// 4. operator structure
Outcome c4() {
  Equilibrium eq = homogeneous(asymmetric_profile(), 32);
  double sym = 0, kern = 0, colavg = 0, psd = 0;
  for (double l : {0.0, 0.5, 2.0}) {
    OperatorSet ops = assemble_operators(eq, l);
    sym = std::max({sym, ops.diag.defect_A1, ops.diag.defect_A2, ops.diag.defect_L, ops.diag.kernel_defect});
    kern = std::max(kern, ops.diag.A1_kernel_residual);
    colavg = std::max(colavg, ops.diag.B_column_average);
    Eigen::VectorXd s = eq.grid.weights().cwiseSqrt();
    Eigen::MatrixXd S = s.cwiseInverse().asDiagonal() * ops.WA1 * s.cwiseInverse().asDiagonal();
    auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues();
    psd = std::min(psd, ev.minCoeff() / ev.cwiseAbs().maxCoeff());
  }
  // simplified condition: species-symmetric profile, purely magnetic equilibrium
  Equilibrium pm = volterra(make_profile("damped"), 32, 0.0, 0.3);
  OperatorSet o0 = assemble_operators(pm, 0.0);
  double b0 = o0.B.M.cwiseAbs().maxCoeff();
  bool ok = sym <= 1e-6 && kern <= 1e-6 && colavg <= 1e-10 && psd >= -1e-12 && b0 <= 1e-10;
  return {ok, "symmetry " + fmt(sym) + ", A1 kernel " + fmt(kern) + ", min eig(A1)/max " + fmt(psd) +
                  ", B column average " + fmt(colavg) + ", max |B0| (symmetric) " + fmt(b0)};
}

// 5. <L psi, psi> = <A2 psi, psi> + <A1 phi, phi>, A1 phi = B psi
Outcome c5() {
  // species asymmetry: B0 is a genuine coupling
  Equilibrium eq = homogeneous(make_profile("skewed", {{"mirror", 0.0}, {"delta", 0.9}}), 32);
  OperatorSet ops = assemble_operators(eq, 0.0);
  std::mt19937 rng(11);
  std::normal_distribution<double> N;
  double worst = 0, bnorm = 0;
  for (int k = 0; k < 20; ++k) {
    // low modes, otherwise the gradient part of A2 swamps the coupling
    double c[4];
    for (auto& x : c) x = N(rng);
    Eigen::VectorXd psi(eq.grid.n);
    for (int i = 0; i < eq.grid.n; ++i) {
      double r = eq.grid.r[i];
      psi[i] = 0;
      for (int m = 0; m < 4; ++m) psi[i] += c[m] * r * std::sin((m + 1) * kPi * r);
    }
    Eigen::VectorXd phi = solve_A1(ops, ops.B.M * psi);
    double lhs = psi.dot(ops.WL * psi);
    double a2 = psi.dot(ops.WA2 * psi), a1 = phi.dot(ops.WA1 * phi);
    worst = std::max(worst, std::abs(lhs - a2 - a1) / (std::abs(a2) + std::abs(a1)));
    bnorm = std::max(bnorm, a1 / std::abs(a2));
  }
  return {worst <= 1e-8, "max relative defect " + fmt(worst) + " (coupling share up to " + fmt(bnorm) + ")"};
}

// 6. mu = exp(-e - p^2), small psi0: stable
Outcome c6() {
  Equilibrium eq = volterra(make_profile("damped"), 128, 0.0, 0.1);
  StabilityReport rep = verdict(eq);
  const Certificate* c = nullptr;
  for (const auto& x : rep.certificates)
    if (x.name == "stab-i") c = &x;
  bool cert = c && c->hypothesis_holds && c->value < 1;
  bool ok = rep.verdict == "stable" && rep.kappa0 > rep.margin && cert;
  return {ok, "verdict " + rep.verdict + ", kappa0 = " + fmt(rep.kappa0) + ", margin " + fmt(rep.margin) +
                  ", sup-psi certificate " + (c ? fmt(c->value) : std::string("missing"))};
}

// 7. K* sweeps under amplitude and momentum scaling and for the Dirichlet magnetic family
Outcome c7() {
  struct Case {
    std::string name;
    Profile base;
    Scaling sc;
    SweepFamily fam;
    std::vector<double> Ks;
  };
  const std::vector<double> amp{0.05, 0.1, 0.25, 0.5, 1, 2, 4, 8, 16, 32},
                            mom{0.05, 0.1, 0.25, 0.5, 1, 2, 4, 8};
  std::vector<Case> cases{{"amplitude", make_profile("even_p"), Scaling::Amplitude, SweepFamily::Homogeneous, amp},
                          {"momentum", make_profile("even_p"), Scaling::Momentum, SweepFamily::Homogeneous, mom},
                          {"dirichlet", make_profile("skewed"), Scaling::Amplitude, SweepFamily::DirichletMagnetic, amp}};
  bool ok = true;
  std::string d;
  for (const auto& c : cases) {
    SweepOptions o64, o128;
    o64.n = 64;
    o128.n = 128;
    SweepResult a = sweep_K(c.base, c.sc, c.Ks, c.fam, o64);
    SweepResult b = sweep_K(c.base, c.sc, c.Ks, c.fam, o128);
    const auto& p = a.points;
    // quadratic through the three smallest K, evaluated at K = 0 (momentum scaling enters as K^2)
    double intercept = 0;
    for (int i = 0; i < 3; ++i) {
      double li = 1;
      for (int j = 0; j < 3; ++j)
        if (j != i) li *= p[j].K / (p[j].K - p[i].K);
      intercept += li * p[i].form;
    }
    bool crosses = std::isfinite(a.K_star_form) && std::abs(intercept - 1) <= 1e-3;
    bool kappa_neg = true, bound = true;
    for (const auto& pt : p) {
      if (pt.K >= a.K_star_form && pt.kappa0 >= 0) kappa_neg = false;
      if (c.fam == SweepFamily::DirichletMagnetic && !pt.bound.holds) bound = false;
    }
    double drift = std::abs(a.K_star_form - b.K_star_form) / a.K_star_form;
    bool pass = crosses && kappa_neg && bound && drift <= 0.05;
    ok = ok && pass;
    d += c.name + ": K* " + fmt(a.K_star_form) + " -> " + fmt(b.K_star_form) + " (" + fmt(100 * drift) +
         "%), form(0) " + fmt(intercept) + (kappa_neg ? "" : ", kappa0 >= 0 beyond K*") +
         (bound ? "" : ", bound violated") + "; ";
  }
  return {ok, d};
}

// 8. growing mode on the momentum-scaled scenario
Outcome c8() {
  Equilibrium eq = homogeneous(scale_momentum(make_profile("even_p"), 8), 64);
  VerdictOptions vo;
  vo.search.lambda_min = 0.05;
  vo.search.lambda_max = 20;
  vo.search.scan_points = 12;
  StabilityReport rep = verdict(eq, vo);
  if (!rep.has_mode) return {false, "verdict " + rep.verdict + ", no mode (search found = " +
                                        std::string(rep.search.found ? "true" : "false") + ")"};
  const auto& r = rep.mode.res;
  bool ok = std::abs(rep.search.kappa_star) <= 1e-6 && r.poisson <= 1e-4 && r.ampere <= 1e-4 && r.flux <= 1e-4 &&
            r.specular <= 1e-6 && r.invariant <= 1e-4 && r.casimir <= 1e-4;
  std::ostringstream os;
  os << "lambda* = " << fmt(rep.search.lambda_star) << ", kappa* = " << fmt(rep.search.kappa_star)
     << ", maxwell " << fmt(r.poisson) << "/" << fmt(r.ampere) << ", flux " << fmt(r.flux) << ", specular "
     << fmt(r.specular) << ", invariant " << fmt(r.invariant) << ", casimir " << fmt(r.casimir) << ", vlasov "
     << fmt(r.vlasov);
  return {ok, os.str()};
}

// 9. Picard on eps-scaled profiles; purely magnetic symmetric case keeps phi0 = 0
Outcome c9() {
  Profile p = scale_amplitude(make_profile("even_p"), 0.1);
  Equilibrium a = volterra(p, 64, 0.2, 0.2);
  Equilibrium b = volterra(scale_amplitude(make_profile("damped"), 0.1), 64, 0.0, 0.5);
  bool ok = a.contraction < 1 && a.residual <= 1e-6 && b.contraction < 1 && b.residual <= 1e-6 && b.sup_phi() <= 1e-10 &&
            b.sup_phi_during <= 1e-10;
  return {ok, "contraction " + fmt(a.contraction) + ", residual " + fmt(a.residual) + " (" +
                  std::to_string(a.iterations) + " it); symmetric: residual " + fmt(b.residual) + ", sup|phi0| " +
                  fmt(b.sup_phi())};
}

// 10. adjoint identity at lambda = 0.5 against direct double quadrature
Outcome c10() {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 32);
  std::mt19937 rng(5);
  std::normal_distribution<double> N;
  // smooth in Cartesian phase space and specular at r = 1
  auto make = [&]() {
    double c[6];
    for (double& x : c) x = N(rng);
    return PhaseFn([=](const PhasePoint& z) {
      double r2 = z.r * z.r, p = z.r * z.vt, rv = z.r * z.vr;
      return std::exp(-0.1 * (z.vr * z.vr + z.vt * z.vt)) *
             (c[0] + c[1] * r2 + c[2] * p + c[3] * rv * rv + c[4] * p * rv * rv + c[5] * rv * (1 - r2));
    });
  };
  std::vector<PhaseFn> gs, hs;
  for (int k = 0; k < 5; ++k) {
    gs.push_back(make());
    hs.push_back(make());
  }
  AdjointReport rep = check_adjoint(eq, 1, 0.5, gs, hs);
  return {rep.worst <= 1e-5, "worst relative defect " + fmt(rep.worst) + " over 5 pairs, " +
                                 std::to_string(rep.trajectories) + " trajectories"};
}

struct Criterion {
  int id;
  double budget;  // seconds
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{{1, 5, c1},    {2, 30, c2},  {3, 600, c3}, {4, 600, c4},  {5, 600, c5},
                                   {6, 120, c6},  {7, 600, c7}, {8, 1200, c8}, {9, 60, c9}, {10, 300, c10}};
  std::vector<int> want;
  for (int i = 1; i < argc; ++i) want.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : all) {
    if (!want.empty() && std::find(want.begin(), want.end(), c.id) == want.end()) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = secs <= c.budget;
    bool pass = o.pass && in_time;
    all_pass = all_pass && pass;
    std::printf("criterion %d: %s  %s [%.1f s%s]\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
