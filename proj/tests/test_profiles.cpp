#include <gtest/gtest.h>

#include <cmath>

#include <vmstab/common.hpp>
#include <vmstab/profiles.hpp>

using namespace vmstab;

TEST(Profiles, MaxwellianValues) {
  Profile p = make_profile("maxwellian");
  for (double e : {1.0, 2.5, 7.0}) {
    MuEval m = p.eval(1, e, 0.3);
    EXPECT_DOUBLE_EQ(m.mu, std::exp(-e));
    EXPECT_DOUBLE_EQ(m.mu_e, -std::exp(-e));
    EXPECT_EQ(m.mu_p, 0.0);
    EXPECT_EQ(p.mu(-1, e, 0.3), m.mu);
  }
}

TEST(Profiles, EvenPDerivatives) {
  Profile p = make_profile("even_p");
  MuEval m = p.eval(1, 2.0, 1.5);
  double x = std::exp(-2.0);
  EXPECT_NEAR(m.mu, x * (1 + 0.5 * 2.25), 1e-15);
  EXPECT_NEAR(m.mu_p, 1.5 * x, 1e-15);
  EXPECT_TRUE(p.has_nu());
}

TEST(Profiles, FiniteDifferenceDerivatives) {
  MuFn f = finite_difference_derivatives([](double e, double p) { return std::exp(-e - p * p); });
  Profile d = make_profile("damped");
  for (double e : {1.0, 3.0})
    for (double p : {-1.0, 0.2, 2.0}) {
      MuEval a = f(e, p), b = d.eval(1, e, p);
      EXPECT_NEAR(a.mu, b.mu, 1e-15);
      EXPECT_NEAR(a.mu_e, b.mu_e, 1e-9);
      EXPECT_NEAR(a.mu_p, b.mu_p, 1e-9);
    }
}

TEST(Profiles, Scalings) {
  Profile base = make_profile("even_p");
  Profile a = scale_amplitude(base, 4.0);
  Profile m = scale_momentum(base, 3.0);
  MuEval b0 = base.eval(1, 2.0, 0.7), ba = a.eval(1, 2.0, 0.7), bm = m.eval(1, 2.0, 0.7);
  EXPECT_NEAR(ba.mu, 4 * b0.mu, 1e-15);
  EXPECT_NEAR(ba.mu_e, 4 * b0.mu_e, 1e-15);
  EXPECT_NEAR(a.C_mu(), 4 * base.C_mu(), 1e-12 * a.C_mu());
  MuEval bk = base.eval(1, 2.0, 2.1);
  EXPECT_NEAR(bm.mu, bk.mu, 1e-15);
  EXPECT_NEAR(bm.mu_p, 3 * bk.mu_p, 1e-15);
  Profile s = scale_species(base, 2.0, 0.5);
  EXPECT_NEAR(s.mu(1, 2.0, 0.7), 2 * b0.mu, 1e-15);
  EXPECT_NEAR(s.mu(-1, 2.0, 0.7), 0.5 * b0.mu, 1e-15);
  EXPECT_THROW(scale_amplitude(base, 0.0), Error);
  EXPECT_THROW(scale_momentum(base, -1.0), Error);
}

TEST(Profiles, BuiltinsAdmissible) {
  for (const auto& name : builtin_profile_names()) {
    if (name == "vacuum") continue;
    AdmissibilityReport r = check_admissible(make_profile(name), 400);
    EXPECT_TRUE(r.pass) << name;
    EXPECT_GT(r.samples, 0);
  }
}

TEST(Profiles, IncreasingInEnergyRejected) {
  MuFn bad = [](double e, double) { return MuEval{std::exp(-e) * (1 + std::sin(e)), 0.0, 0.0}; };
  Profile p("bad", bad, bad, 3.0);
  p.set_decay(10.0, 3.0);
  AdmissibilityReport r = check_admissible(p, 200);
  EXPECT_FALSE(r.pass);
}

TEST(Profiles, SpeciesSymmetry) {
  EXPECT_TRUE(check_species_symmetry(make_profile("even_p")).holds());
  EXPECT_TRUE(check_species_symmetry(make_profile("skewed")).holds());
  EXPECT_FALSE(check_species_symmetry(make_profile("skewed", {{"mirror", 0.0}})).holds());
}

TEST(Profiles, BadParameters) {
  EXPECT_THROW(make_profile("nonesuch"), Error);
  EXPECT_THROW(make_profile("skewed", {{"delta", 1.5}}), Error);
  EXPECT_THROW(make_profile("maxwellian", {{"gamma", 2.0}}), Error);
}
