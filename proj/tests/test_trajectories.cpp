#include <gtest/gtest.h>

#include <cmath>

#include <vmstab/common.hpp>
#include <vmstab/orbits.hpp>
#include <vmstab/trajectories.hpp>

#include "support.hpp"

using namespace vmstab;
using namespace vmstab::test;

TEST(Trajectories, ReflectOnlyAtWall) {
  PhasePoint z{1.0, 0.4, -0.2};
  PhasePoint w = reflect(z);
  EXPECT_EQ(w.vr, -0.4);
  EXPECT_EQ(w.vt, -0.2);
  EXPECT_THROW(reflect(PhasePoint{0.9, 0.4, 0.1}), Error);
}

TEST(Trajectories, FreeStreamingIsStraight) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  PhasePoint z{0.3, 0.5, 0.8};
  double g = momentum_factor(z.vr, z.vt);
  double s = -0.15;
  Trajectory t = integrate(eq, 1, z, s);
  EXPECT_EQ(t.reflections, 0);
  // Cartesian frame with the particle on the x axis
  double x = 0.3 + z.vr / g * s, y = z.vt / g * s;
  EXPECT_NEAR(t.end.r, std::hypot(x, y), 1e-10);
  EXPECT_NEAR(t.e_drift, 0.0, 1e-12);
}

TEST(Trajectories, InvariantsInMagneticField) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.5);
  PhasePoint z{0.4, 1.2, -0.9};
  Trajectory t = integrate(eq, -1, z, -30.0);
  EXPECT_GT(t.reflections, 2);
  EXPECT_LT(t.e_drift, 1e-10);
  EXPECT_LT(t.p_drift, 1e-8);
  EXPECT_NEAR(particle_energy(eq, -1, t.end), particle_energy(eq, -1, z), 1e-10);
}

TEST(Trajectories, QLambdaOfConstant) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  PhaseFn one = [](const PhasePoint&) { return 1.0; };
  for (double l : {0.3, 2.0}) {
    QLambdaResult q = q_lambda(eq, 1, l, one, PhasePoint{0.5, 0.3, 0.4});
    EXPECT_NEAR(q.value, 1.0, 1e-12);
    EXPECT_GT(q.horizon, 0);
  }
}

TEST(Trajectories, QLambdaLargeLambdaIsPointValue) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  PhaseFn g = [](const PhasePoint& z) { return z.r * z.r; };
  PhasePoint z{0.5, 0.3, 0.2};
  EXPECT_NEAR(q_lambda(eq, 1, 1e4, g, z).value, 0.25, 1e-3);
}

TEST(Trajectories, EvenFunctionsStaySpecular) {
  Equilibrium eq = volterra(make_profile("damped"), 32, 0.0, 0.3);
  PhaseFn g = [](const PhasePoint& z) { return z.vr * z.vr + z.r * z.vt; };
  SpecularityReport r = check_specularity(eq, 1, g);
  EXPECT_TRUE(r.specular(1e-8)) << r.input_defect << " " << r.transported_defect;
}

TEST(Orbits, ChordPeriodInHomogeneousDisk) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 16);
  PhasePoint z{0.6, 0.7, 0.5};
  double v = std::hypot(z.vr, z.vt), b = z.r * std::abs(z.vt) / v;
  double speed = v / momentum_factor(z.vr, z.vt);
  OrbitInfo o = orbit_info(eq, 1, z);
  ASSERT_TRUE(o.valid);
  EXPECT_TRUE(o.wall);
  EXPECT_NEAR(o.r_in, b, 1e-10);
  EXPECT_NEAR(o.period, 2 * std::sqrt(1 - b * b) / speed, 1e-8);
}

TEST(Orbits, MaxwellianPhaseMass) {
  Equilibrium eq = homogeneous(make_profile("maxwellian"), 32);
  double m = orbit_phase_integral(eq, [](int, double e, double, const PhasePoint&) { return std::exp(-e); });
  // two species, disk area pi
  EXPECT_NEAR(m / (2 * kPi * 4 * kPi / std::exp(1.0)), 1.0, 1e-4);
}
