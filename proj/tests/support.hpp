#pragma once
#include <vmstab/discretization.hpp>
#include <vmstab/equilibrium.hpp>
#include <vmstab/profiles.hpp>

namespace vmstab::test {

inline Equilibrium homogeneous(const Profile& p, int n) {
  return homogeneous_equilibrium(p, build_grid(n), build_velocity_quad(p, 1e-10, 0));
}

// Picard solve, redone once if the field shifts move the velocity cutoff
inline Equilibrium volterra(const Profile& p, int n, double alpha, double beta) {
  RadialGrid g = build_grid(n);
  VelocityQuadOptions qo;
  Equilibrium eq = solve_equilibrium(p, alpha, beta, g, build_velocity_quad(p, qo));
  qo.phi_allow = eq.sup_phi();
  qo.psi_allow = eq.sup_psi();
  VelocityQuad q2 = build_velocity_quad(p, qo);
  if (q2.vmax != eq.quad.vmax) eq = solve_equilibrium(p, alpha, beta, g, q2);
  return eq;
}

// both species identical: breaks the species symmetry, keeps E0 = B0 = 0
inline Profile asymmetric_profile() { return make_profile("skewed", {{"mirror", 0.0}}); }

}  // namespace vmstab::test
