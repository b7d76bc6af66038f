#include <gtest/gtest.h>

#include <cmath>

#include <vmstab/common.hpp>
#include <vmstab/equilibrium.hpp>

#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

TEST(Equilibrium, VolterraConstantSources) {
  // -Delta phi = c  ->  phi = alpha - c r^2/4;  -Delta_r psi = 0  ->  psi = beta r
  std::vector<double> nodes{0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> h(5, 2.0), g(5, 0.0);
  std::vector<double> t{0.1, 0.4, 0.9};
  VolterraValues v = volterra_eval(nodes, h, g, 0.3, 0.7, t);
  for (size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(v.phi[i], 0.3 - 0.5 * t[i] * t[i], 1e-13);
    EXPECT_NEAR(v.E[i], t[i], 1e-13);
    EXPECT_NEAR(v.psi[i], 0.7 * t[i], 1e-13);
    EXPECT_NEAR(v.B[i], 1.4, 1e-13);
  }
}

TEST(Equilibrium, VolterraLinearCurrent) {
  // -Delta_r psi = r  ->  psi = beta r - r^3/8
  std::vector<double> nodes;
  for (int i = 0; i <= 10; ++i) nodes.push_back(0.1 * i);
  std::vector<double> h(nodes.size(), 0.0), g = nodes;
  VolterraValues v = volterra_eval(nodes, h, g, 0.0, 0.2, {0.35, 0.8});
  EXPECT_NEAR(v.psi[0], 0.2 * 0.35 - std::pow(0.35, 3) / 8, 1e-13);
  EXPECT_NEAR(v.psi[1], 0.2 * 0.8 - std::pow(0.8, 3) / 8, 1e-13);
  EXPECT_NEAR(v.phi[0], 0.0, 1e-15);
}

TEST(Equilibrium, HomogeneousHasNoFields) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 32);
  EXPECT_TRUE(eq.homogeneous());
  EXPECT_TRUE(eq.purely_magnetic());
  EXPECT_EQ(eq.sup_phi(), 0.0);
  EXPECT_EQ(eq.Er(0.5), 0.0);
  EXPECT_EQ(eq.B(0.5), 0.0);
}

TEST(Equilibrium, SymmetricProfileIsPurelyMagnetic) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  EXPECT_LE(eq.sup_phi(), 1e-12);
  EXPECT_LE(eq.sup_phi_during, 1e-12);
  EXPECT_GT(eq.sup_psi(), 0.1);
  EXPECT_LT(eq.residual, 1e-10);
  EXPECT_LT(eq.contraction, 1.0);
  EXPECT_TRUE(eq.purely_magnetic());
  EXPECT_FALSE(eq.homogeneous());
}

TEST(Equilibrium, NewtonCrossCheckAgrees) {
  Equilibrium eq = volterra(scale_amplitude(make_profile("even_p"), 0.1), 64, 0.2, 0.2);
  EXPECT_GT(eq.sup_phi(), 0.0);
  NewtonCheck nc = newton_crosscheck(eq);
  EXPECT_TRUE(nc.converged);
  // second-order discretization against the exact Volterra representation
  EXPECT_LT(nc.max_diff, 1e-3);
}

TEST(Equilibrium, SplineFieldsMatchNodes) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  for (int i = 0; i < eq.grid.n; i += 5) {
    EXPECT_NEAR(eq.S(eq.grid.r[i]), eq.psi0[i], 1e-10);
    EXPECT_NEAR(eq.B(eq.grid.r[i]), eq.B0[i], 1e-3);
  }
  // psi extended oddly through the axis
  EXPECT_NEAR(eq.S(0.0), 0.0, 1e-14);
}

TEST(Equilibrium, DirichletMagnetic) {
  Profile p = scale_amplitude(make_profile("skewed"), 2.0);
  RadialGrid g = build_grid(32);
  Equilibrium eq = solve_psi0_dirichlet(p, g, build_velocity_quad(p, 1e-10, 0));
  EXPECT_EQ(eq.kind, "dirichlet");
  EXPECT_NEAR(eq.S(1.0), 0.0, 1e-10);
  EXPECT_LE(eq.sup_phi(), 1e-12);
  EXPECT_LT(eq.residual, 1e-8);
}

TEST(Equilibrium, MomentsOddInSpeciesForSymmetricProfile) {
  Profile p = make_profile("damped");
  VelocityQuadOptions qo;
  qo.psi_allow = 0.2;
  VelocityQuad q = build_velocity_quad(p, qo);
  MomentPair m = moments(p, q, 0.5, 0.0, 0.2);
  EXPECT_NEAR(m.h, 0.0, 1e-14);
  EXPECT_NE(m.g, 0.0);
}
