#pragma once
#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "vmstab/discretization.hpp"
#include "vmstab/equilibrium.hpp"
#include "vmstab/orbits.hpp"

namespace vmstab {

// explicit: closed-form projections (lambda = 0, E0 = 0 only); orbit: Q_lambda along orbits
enum class ProjectionMode { Auto, Explicit, Orbit };
ProjectionMode parse_projection_mode(const std::string& s);
std::string to_string(ProjectionMode m);

struct OperatorOptions {
  ProjectionMode projection = ProjectionMode::Auto;
  OrbitOptions orbit;
  double symmetry_gate = 1e-4;  // raw defect above this aborts the assembly
};

struct OperatorDiagnostics {
  std::string strategy;
  double defect_A1 = 0, defect_A2 = 0, defect_L = 0;  // raw, before symmetrization
  double defect_Bstar = 0;    // ||Bstar - adj(B)|| / ||B||
  double formula_Bstar = 0;   // ||Bstar + diag(beta) Pi|| / ||Bstar|| (explicit route only)
  double kernel_defect = 0;   // orbit kernel matrix ||K - K^T|| / ||K||
  double B_column_average = 0;  // max over columns of |disk average|
  double A1_kernel_residual = 0;  // ||A1 1|| / ||A1||
  double A1_condition = 0;        // of the deflated system
  double quad_tail = 0;
  long orbits = 0;
  double seconds = 0;
};

struct OperatorSet {
  double lambda = 0;
  RadialGrid grid;
  RadialOperator A1, A2, B, Bstar, L;
  // forms W*Op (symmetric where the operator is)
  Eigen::MatrixXd WA1, WA2, WB, WL;
  Eigen::MatrixXd Kpp;  // sum <<mu_e Q(vhat U_i) vhat U_j>>  (projection term of A2)
  Eigen::MatrixXd Nfp, Mfp;  // orbit route: sum <<r mu_p U^N U^D>>, sum <<mu_e U^N vhat U^D>>
  OperatorDiagnostics diag;
  Eigen::LDLT<Eigen::MatrixXd> A1_deflated;  // factor of W A1 + w w^T / pi
};

OperatorSet assemble_operators(const Equilibrium& eq, double lambda, const OperatorOptions& opt = {});

inline RadialOperator assemble_A1(const Equilibrium& eq, double lambda, const OperatorOptions& opt = {}) {
  return assemble_operators(eq, lambda, opt).A1;
}
inline RadialOperator assemble_A2(const Equilibrium& eq, double lambda, const OperatorOptions& opt = {}) {
  return assemble_operators(eq, lambda, opt).A2;
}

// Zero-mean solution of A1 phi = f; f must have zero disk average (it is projected).
Eigen::VectorXd solve_A1(const OperatorSet& ops, const Eigen::VectorXd& f);

// <B* A1^{-1} B psi, psi> - sum <<mu_e |P(vhat psi)|^2>>, from a lambda = 0 set
double minimized_J(const OperatorSet& ops0, const Eigen::VectorXd& psi);

// Dense textual dump: header lines "# name n lambda tag", then n rows.
void dump_matrix(std::ostream& os, const std::string& name, const RadialOperator& op);

}  // namespace vmstab
