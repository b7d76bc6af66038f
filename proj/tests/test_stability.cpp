#include <gtest/gtest.h>

#include <cmath>

#include <vmstab/common.hpp>
#include <vmstab/stability.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

TEST(Stability, VacuumKappaIsBesselEigenvalue) {
  Equilibrium eq = homogeneous(make_profile("vacuum"), 64);
  KappaResult k = kappa(assemble_operators(eq, 0.0));
  double j = oracle::j11();
  EXPECT_NEAR(k.kappa / (j * j), 1.0, 1e-3);
  EXPECT_NEAR(eq.grid.inner(k.psi, k.psi), 1.0, 1e-12);
}

TEST(Stability, PsiStar) {
  RadialGrid g = build_grid(128);
  Eigen::VectorXd s = build_psi_star(g);
  EXPECT_NEAR(gradient_energy(g, s), 1.0, 1e-2);
  EXPECT_NEAR(psi_star_value(1.0), 0.0, 1e-14);
  EXPECT_NEAR(psi_star_value(0.0), 0.0, 1e-14);
}

TEST(Stability, ResolveOnGridKeepsFamily) {
  Equilibrium eq = volterra(make_profile("damped"), 16, 0.0, 0.3);
  Equilibrium fine = resolve_on_grid(eq, 32);
  EXPECT_EQ(fine.grid.n, 32);
  EXPECT_EQ(fine.kind, eq.kind);
  EXPECT_NEAR(fine.S(0.5), eq.S(0.5), 1e-3);
}

TEST(Stability, VacuumVerdictStable) {
  Equilibrium eq = homogeneous(make_profile("vacuum"), 32);
  VerdictOptions o;
  o.search_mode = false;
  StabilityReport r = verdict(eq, o);
  EXPECT_EQ(r.verdict, "stable");
  EXPECT_GT(r.kappa0, r.margin);
  EXPECT_EQ(r.n_fine, 64);
}

TEST(Stability, SmallAmplitudeFormNearOne) {
  SweepOptions o;
  o.n = 32;
  SweepPoint p = sweep_point(make_profile("even_p"), Scaling::Amplitude, SweepFamily::Homogeneous, 0.01, o);
  EXPECT_NEAR(p.form, 1.0, 2e-2);
  EXPECT_GT(p.kappa0, 0);
  SweepPoint q = sweep_point(make_profile("even_p"), Scaling::Amplitude, SweepFamily::Homogeneous, 32, o);
  EXPECT_LT(q.form, 0);
  EXPECT_LT(q.kappa0, 0);
}

TEST(Stability, SweepFindsThreshold) {
  SweepOptions o;
  o.n = 32;
  SweepResult r = sweep_K(make_profile("even_p"), Scaling::Amplitude, {1, 4, 16, 32}, SweepFamily::Homogeneous, o);
  ASSERT_TRUE(std::isfinite(r.K_star_form));
  EXPECT_GT(r.K_star_form, 4);
  EXPECT_LT(r.K_star_form, 16);
}

TEST(Stability, CertificatesForDampedProfile) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.1);
  auto certs = theorem_certificates(eq, assemble_operators(eq, 0.0));
  bool found = false;
  for (const auto& c : certs)
    if (c.name == "stab-i") {
      found = true;
      EXPECT_TRUE(c.hypothesis_holds);
      EXPECT_LT(c.value, 1.0);
    }
  EXPECT_TRUE(found);
}

TEST(Stability, NameParsing) {
  EXPECT_EQ(parse_scaling("momentum"), Scaling::Momentum);
  EXPECT_EQ(parse_family("dirichlet-magnetic"), SweepFamily::DirichletMagnetic);
  EXPECT_EQ(to_string(Scaling::Amplitude), "amplitude");
  EXPECT_THROW(parse_scaling("linear"), Error);
}
