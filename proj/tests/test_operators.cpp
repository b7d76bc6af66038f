#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <vmstab/common.hpp>
#include <vmstab/operators.hpp>
#include <vmstab/orbits.hpp>

#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

TEST(Operators, ProjectionModeNames) {
  EXPECT_EQ(parse_projection_mode("orbit"), ProjectionMode::Orbit);
  EXPECT_EQ(to_string(parse_projection_mode("explicit")), "explicit");
  EXPECT_THROW(parse_projection_mode("fourier"), Error);
}

TEST(Operators, VacuumIsDirichletLaplacian) {
  Equilibrium eq = homogeneous(make_profile("vacuum"), 32);
  OperatorSet ops = assemble_operators(eq, 0.0);
  Eigen::MatrixXd D = laplacian_r_dirichlet(eq.grid).M;
  EXPECT_LT((ops.L.M - D).norm(), 1e-12 * D.norm());
}

TEST(Operators, SymmetricAndPositiveA1) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  for (ProjectionMode m : {ProjectionMode::Explicit, ProjectionMode::Orbit}) {
    OperatorOptions o;
    o.projection = m;
    OperatorSet ops = assemble_operators(eq, 0.0, o);
    EXPECT_LT(ops.diag.defect_A1, 1e-6);
    EXPECT_LT(ops.diag.defect_A2, 1e-6);
    EXPECT_LT(ops.diag.A1_kernel_residual, 1e-10);
    EXPECT_LT(ops.B.M.cwiseAbs().maxCoeff(), 1e-10);  // species-symmetric, E0 = 0
  }
}

TEST(Operators, ExplicitRouteNeedsZeroLambda) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  OperatorOptions o;
  o.projection = ProjectionMode::Explicit;
  EXPECT_THROW(assemble_operators(eq, 0.5, o), Error);
}

TEST(Operators, SolveA1) {
  Equilibrium eq = homogeneous(test::asymmetric_profile(), 24);
  OperatorSet ops = assemble_operators(eq, 0.0);
  Eigen::VectorXd f = ops.B.M * Eigen::VectorXd::LinSpaced(24, 0.1, 1.0);
  Eigen::VectorXd phi = solve_A1(ops, f);
  EXPECT_LT((ops.A1.M * phi - f).norm(), 1e-9 * f.norm());
  EXPECT_NEAR(eq.grid.integrate(phi), 0.0, 1e-12);
}

TEST(Operators, LargeLambdaKernelIsIdentity) {
  // Q_lambda -> identity as lambda -> infinity
  Equilibrium eq = volterra(make_profile("damped"), 16, 0.0, 0.3);
  OrbitForms f = assemble_orbit_forms(eq, 100.0);
  EXPECT_LT((f.K - f.M).norm() / f.M.norm(), 5e-2);
  EXPECT_LT(f.raw_symmetry_defect, 1e-6);
  EXPECT_LT(f.skipped * 50, f.orbits);
}

TEST(Operators, OrbitKernelSymmetricAtPositiveLambda) {
  Equilibrium eq = homogeneous(test::asymmetric_profile(), 16);
  OrbitForms f = assemble_orbit_forms(eq, 0.5);
  EXPECT_LT(f.raw_symmetry_defect, 1e-8);
  // Q is a contraction in the |mu_e|-weighted norm (the forms carry the sign of mu_e)
  double sgn = f.M(0, 0) > 0 ? 1.0 : -1.0;
  Eigen::MatrixXd D = sgn * (f.M - 0.5 * (f.K + f.K.transpose()));
  double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D).eigenvalues()(0);
  EXPECT_GT(lo, -1e-10 * f.M.norm());
}

TEST(Operators, DumpFormat) {
  Equilibrium eq = homogeneous(make_profile("vacuum"), 8);
  OperatorSet ops = assemble_operators(eq, 0.0);
  std::ostringstream os;
  dump_matrix(os, "L", ops.L);
  std::string s = os.str();
  EXPECT_EQ(s.rfind("# L n 8", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 9);
}
