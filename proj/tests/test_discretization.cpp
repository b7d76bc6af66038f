#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>
#include <vmstab/common.hpp>
#include <vmstab/discretization.hpp>
#include <vmstab/quadrature.hpp>

#include "oracles.hpp"

using namespace vmstab;

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  const GaussRule& g = gauss_legendre(6);
  double s = 0;
  for (size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], 10);
  EXPECT_NEAR(s, 2.0 / 11, 1e-14);
}

TEST(Quadrature, BrentRoot) {
  double r = brent_root([](double x) { return std::cos(x) - x; }, 0, 1, 1e-15);
  EXPECT_NEAR(r, 0.7390851332151607, 1e-14);
}

TEST(Grid, WeightsIntegrateDiskArea) {
  for (int n : {16, 64}) {
    RadialGrid g = build_grid(n);
    Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
    EXPECT_NEAR(g.integrate(one), kPi, 1e-12) << n;
    EXPECT_EQ(g.knots().size(), static_cast<size_t>(n + 2));
  }
}

TEST(Grid, DirichletEigenvalueNearBesselZero) {
  RadialGrid g = build_grid(64);
  Eigen::MatrixXd M = laplacian_r_dirichlet(g).M;
  EXPECT_LT(symmetry_defect(g, M), 1e-12);
  Eigen::VectorXd s = g.weights().cwiseSqrt();
  Eigen::MatrixXd S = s.asDiagonal() * M * s.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose());
  double l1 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues()(0);
  double j = oracle::j11();
  EXPECT_NEAR(l1 / (j * j), 1.0, 1e-3);
}

TEST(Grid, NeumannKernelIsConstants) {
  RadialGrid g = build_grid(32);
  Eigen::MatrixXd M = laplacian_neumann(g).M;
  EXPECT_LT((M * Eigen::VectorXd::Ones(32)).norm(), 1e-10 * M.norm());
  EXPECT_LT(symmetry_defect(g, M), 1e-12);
}

TEST(Grid, Interpolants) {
  RadialGrid g = build_grid(20);
  Eigen::VectorXd v(20);
  for (int i = 0; i < 20; ++i) v[i] = 2 * g.r[i] + 1;
  EXPECT_NEAR(interp_neumann(g, v, g.r[7]), v[7], 1e-14);
  EXPECT_NEAR(interp_dirichlet(g, v, 1.0), 0.0, 1e-14);
  EXPECT_NEAR(interp_dirichlet(g, v, 0.0), 0.0, 1e-14);
  // piecewise-linear integral of r(1-r) sampled at nodes vs 1/6
  RadialGrid f = build_grid(400);
  Eigen::VectorXd w(400);
  for (int i = 0; i < 400; ++i) w[i] = f.r[i] * (1 - f.r[i]);
  EXPECT_NEAR(integral_dr_dirichlet(f, w), 1.0 / 6, 1e-5);
  EXPECT_NEAR(integral_dr_dirichlet_weights(f).dot(w), integral_dr_dirichlet(f, w), 1e-15);
}

TEST(VelocityQuad, MaxwellianMass) {
  Profile p = make_profile("maxwellian");
  VelocityQuad q = build_velocity_quad(p, 1e-10, 0);
  double m = q.integrate([&](double vr, double vt) { return std::exp(-momentum_factor(vr, vt)); });
  EXPECT_NEAR(m / oracle::maxwellian_mass(), 1.0, 1e-9);
  EXPECT_EQ(q.size() % 4, 0u);
  // odd integrands cancel exactly
  EXPECT_EQ(q.integrate([](double vr, double vt) { return vr * vt * vt; }), 0.0);
}

TEST(VelocityQuad, LevelRefines) {
  Profile p = make_profile("even_p");
  VelocityQuad a = build_velocity_quad(p, 1e-10, 0), b = build_velocity_quad(p, 1e-10, 2);
  EXPECT_GT(b.size(), a.size());
  auto f = [](double vr, double vt) { return std::exp(-momentum_factor(vr, vt)) * (1 + 0.5 * vt * vt); };
  EXPECT_NEAR(a.integrate(f), b.integrate(f), 1e-8 * b.integrate(f));
}
