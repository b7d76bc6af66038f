#include <gtest/gtest.h>

#include <cmath>

#include <vmstab/common.hpp>
#include <vmstab/kernelproj.hpp>
#include <vmstab/stability.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

TEST(KernelProj, Dispatch) {
  EXPECT_EQ(dispatch_strategy(homogeneous(make_profile("maxwellian"), 16)), ProjectionStrategy::HomogeneousExplicit);
  EXPECT_EQ(dispatch_strategy(volterra(make_profile("damped"), 16, 0.0, 0.3)),
            ProjectionStrategy::PurelyMagneticExplicit);
  EXPECT_EQ(dispatch_strategy(volterra(scale_amplitude(make_profile("even_p"), 0.1), 16, 0.2, 0.2)),
            ProjectionStrategy::QLambdaLimit);
}

TEST(KernelProj, RadialHomogeneousAverages) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 64);
  EXPECT_NEAR(project_radial_homogeneous(eq, Eigen::VectorXd::Ones(64)), 1.0, 1e-12);
  EXPECT_NEAR(project_radial_homogeneous(eq, [](double r) { return r * r; }), 0.5, 1e-12);
  Equilibrium mag = volterra(make_profile("damped"), 16, 0.0, 0.3);
  EXPECT_THROW(project_radial_homogeneous(mag, Eigen::VectorXd::Ones(16)), Error);
}

TEST(KernelProj, PsiStarHasZeroPsiR) {
  RadialGrid g = build_grid(64);
  Eigen::VectorXd s = build_psi_star(g);
  EXPECT_NEAR(psi_R(g, s), 0.0, 1e-12);
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 64);
  PhaseFn P = project_vtheta_homogeneous(eq, s);
  EXPECT_NEAR(P(PhasePoint{0.4, 0.2, 1.1}), 0.0, 1e-12);
}

TEST(KernelProj, ClosedFormValue) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  PhaseFn P = project_vtheta_homogeneous(eq, Eigen::VectorXd::Ones(16));
  PhasePoint z{0.5, 0.3, 0.4};
  EXPECT_NEAR(P(z), 2 * 0.5 * 0.4 / momentum_factor(0.3, 0.4) * psi_R(eq.grid, Eigen::VectorXd::Ones(16)), 1e-14);
}

TEST(KernelProj, OrbitAverageIsChordAverage) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 32);
  auto psi = [](double r) { return r * (1 - r); };
  PhaseFn g = [&](const PhasePoint& z) { return z.vt / momentum_factor(z.vr, z.vt) * psi(z.r); };
  PhaseSamples ps = phase_samples(eq, 1, 6);
  Eigen::VectorXd Q = q_on_samples(eq, ps, 0.0, g);
  Eigen::VectorXd O(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    const PhasePoint& z = ps.z[i];
    double L = z.r * z.vt / momentum_factor(z.vr, z.vt), b = z.r * std::abs(z.vt) / std::hypot(z.vr, z.vt);
    O[i] = L * oracle::chord_average([&](double r) { return psi(r) / r; }, b);
  }
  EXPECT_LT(h_norm(ps, Q - O) / h_norm(ps, sample(ps, g)), 1e-6);
}

TEST(KernelProj, QOnSamplesReproducesConstants) {
  Equilibrium eq = volterra(make_profile("damped"), 16, 0.0, 0.3);
  PhaseSamples ps = phase_samples(eq, -1, 4);
  Eigen::VectorXd q = q_on_samples(eq, ps, 0.5, [](const PhasePoint&) { return 1.0; });
  EXPECT_LT((q.array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(KernelProj, TrajectoryAndOrbitRoutesAgree) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  PhaseFn g = [](const PhasePoint& z) { return z.r * z.r * z.vt; };
  PhasePoint z{0.45, 0.6, -0.3};
  double a = q_lambda(eq, 1, 0.7, g, z).value;
  double b = orbit_q(eq, 1, 0.7, {g}, z)[0];
  EXPECT_NEAR(a, b, 1e-6 * (1 + std::abs(a)));
}

TEST(KernelProj, QLimitCauchySequence) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  QLimitOptions o;
  o.route = QRoute::Orbit;
  o.lambdas = {0.1, 0.03, 0.01, 0.003};
  o.tol = 1e-2;  // Q_lambda - P is O(lambda)
  std::vector<PhasePoint> pts{{0.3, 0.4, 0.5}, {0.7, -0.2, 0.9}};
  QLimitReport r = project_q_limit(eq, 1, [](const PhasePoint& z) { return z.r; }, pts, o);
  ASSERT_EQ(r.cauchy.size(), 4u);
  EXPECT_LT(r.cauchy[3], r.cauchy[1]);
  EXPECT_TRUE(r.converged);
}
