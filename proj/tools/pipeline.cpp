#include "pipeline.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include <vmstab/common.hpp>
#include <vmstab/kernelproj.hpp>
#include <vmstab/operators.hpp>
#include <vmstab/stability.hpp>

namespace vmstab::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* const kVersion = "0.3.0";

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// json numbers: non-finite values become null
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// key = value document with [sections] and '#'-headed tables
class Report {
 public:
  void section(const std::string& name) { os_ << "\n[" << name << "]\n"; }
  void kv(const std::string& k, const std::string& v) { os_ << k << " = " << v << "\n"; }
  void kv(const std::string& k, double v) { kv(k, num(v)); }
  void kv(const std::string& k, int v) { kv(k, std::to_string(v)); }
  void kv(const std::string& k, long v) { kv(k, std::to_string(v)); }
  void kv(const std::string& k, bool v) { kv(k, std::string(v ? "true" : "false")); }
  void header(const std::vector<std::string>& cols) {
    os_ << "#";
    for (const auto& c : cols) os_ << " " << c;
    os_ << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) os_ << (i ? " " : "") << cells[i];
    os_ << "\n";
  }
  void line(const std::string& s) { os_ << s << "\n"; }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error("cli", "cannot write " + p.string());
}

// one curve per file, '#' header, whitespace columns
void write_columns(const fs::path& p, const std::vector<std::string>& header_lines, const std::vector<std::string>& cols,
                   const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (const auto& h : header_lines) os << "# " << h << "\n";
  os << "#";
  for (const auto& c : cols) os << " " << c;
  os << "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? " " : "") << num(r[i]);
    os << "\n";
  }
  write_file(p, os.str());
}

std::string yes(bool b) { return b ? "true" : "false"; }

struct Context {
  const Scenario& s;
  fs::path dir;
  bool verbose;
  Report rep;
  json summary;
  std::string hash;
  std::vector<std::string> curve_header;

  void log(const std::string& m) const {
    if (verbose) std::cerr << "vmstab: " << m << "\n";
  }
};

OperatorOptions operator_options(const Scenario& s) {
  OperatorOptions o;
  o.projection = s.projection;
  o.orbit.rin_per_cell = s.rin_per_cell;
  o.symmetry_gate = s.symmetry_gate;
  return o;
}

void header_block(Context& c) {
  const Scenario& s = c.s;
  c.rep.line("vmstab report");
  c.rep.kv("version", std::string(kVersion));
  c.rep.kv("config", s.path);
  c.rep.kv("config_hash", c.hash);
  c.rep.kv("workflow", s.workflow);
  c.rep.section("profile");
  c.rep.kv("name", s.profile);
  for (const auto& [k, v] : s.params) c.rep.kv("param." + k, v);
  c.rep.kv("scaling", s.scaling);
  if (s.scaling == "species") {
    c.rep.kv("k_plus", s.k_plus);
    c.rep.kv("k_minus", s.k_minus);
  } else if (s.scaling != "none") {
    c.rep.kv("K", s.K);
  }
  c.summary["version"] = kVersion;
  c.summary["config_hash"] = c.hash;
  c.summary["workflow"] = s.workflow;
  c.summary["profile"] = {{"name", s.profile}, {"scaling", s.scaling}, {"K", s.K}};
  c.summary["n"] = s.n;
  c.curve_header = {"vmstab " + std::string(kVersion), "config_hash " + c.hash};
}

void equilibrium_block(Context& c, const Equilibrium& eq) {
  Report& r = c.rep;
  r.section("equilibrium");
  r.kv("kind", eq.kind);
  r.kv("method", eq.method);
  r.kv("n", eq.grid.n);
  r.kv("alpha", eq.alpha);
  r.kv("beta", eq.beta);
  r.kv("iterations", eq.iterations);
  r.kv("residual", eq.residual);
  r.kv("fd_residual", eq.fd_residual);
  r.kv("contraction", eq.contraction);
  r.kv("sup_phi0", eq.sup_phi());
  r.kv("sup_psi0", eq.sup_psi());
  r.kv("homogeneous", eq.homogeneous());
  r.kv("purely_magnetic", eq.purely_magnetic());
  r.section("velocity_quadrature");
  r.kv("nodes", static_cast<long>(eq.quad.size()));
  r.kv("vmax", eq.quad.vmax);
  r.kv("tail_estimate", eq.quad.tail_estimate);
  r.kv("tail_algebraic", eq.quad.tail_algebraic);
  r.kv("tol", eq.quad.tol);
  for (const auto& n : eq.notes) r.kv("note", n);

  c.summary["equilibrium"] = {{"kind", eq.kind},
                              {"method", eq.method},
                              {"iterations", eq.iterations},
                              {"residual", jnum(eq.residual)},
                              {"sup_phi0", jnum(eq.sup_phi())},
                              {"sup_psi0", jnum(eq.sup_psi())},
                              {"quad_nodes", eq.quad.size()},
                              {"vmax", jnum(eq.quad.vmax)},
                              {"quad_tail", jnum(eq.quad.tail_estimate)}};

  std::vector<std::vector<double>> rows;
  FieldSamples fs = fields(eq);
  for (int i = 0; i < eq.grid.n; ++i)
    rows.push_back({eq.grid.r[i], eq.phi0[i], eq.psi0[i], fs.E0r[i], fs.B0[i]});
  write_columns(c.dir / "equilibrium.dat", c.curve_header, {"r", "phi0", "psi0", "E0r", "B0"}, rows);
}

void diag_block(Report& r, const std::string& name, const OperatorDiagnostics& d) {
  r.section(name);
  r.kv("strategy", d.strategy);
  r.kv("defect_A1", d.defect_A1);
  r.kv("defect_A2", d.defect_A2);
  r.kv("defect_L", d.defect_L);
  r.kv("defect_Bstar", d.defect_Bstar);
  r.kv("kernel_defect", d.kernel_defect);
  r.kv("B_column_average", d.B_column_average);
  r.kv("A1_kernel_residual", d.A1_kernel_residual);
  r.kv("A1_condition", d.A1_condition);
  r.kv("quad_tail", d.quad_tail);
  r.kv("orbits", d.orbits);
}

json diag_json(const OperatorDiagnostics& d) {
  return {{"strategy", d.strategy},           {"defect_A1", jnum(d.defect_A1)},
          {"defect_A2", jnum(d.defect_A2)},   {"defect_L", jnum(d.defect_L)},
          {"kernel_defect", jnum(d.kernel_defect)}, {"B_column_average", jnum(d.B_column_average)},
          {"A1_kernel_residual", jnum(d.A1_kernel_residual)}, {"orbits", d.orbits}};
}

void certificates_block(Context& c, const std::vector<Certificate>& certs) {
  Report& r = c.rep;
  r.section("certificates");
  r.header({"name", "applicable", "hypothesis_holds", "value", "threshold", "consistent"});
  json arr = json::array();
  for (const auto& ct : certs) {
    r.row({ct.name, yes(ct.applicable), yes(ct.hypothesis_holds), num(ct.value), num(ct.threshold), yes(ct.consistent)});
    arr.push_back({{"name", ct.name},
                   {"applicable", ct.applicable},
                   {"hypothesis_holds", ct.hypothesis_holds},
                   {"value", jnum(ct.value)},
                   {"threshold", jnum(ct.threshold)},
                   {"consistent", ct.consistent}});
  }
  for (const auto& ct : certs) {
    r.section("certificate." + ct.name);
    r.kv("hypothesis", ct.hypothesis);
    r.kv("conclusion", ct.conclusion.empty() ? "n/a" : ct.conclusion);
    if (!ct.detail.empty()) r.kv("detail", ct.detail);
  }
  c.summary["certificates"] = arr;
}

void mode_block(Context& c, const GrowingMode& m) {
  Report& r = c.rep;
  r.section("mode");
  r.kv("lambda", m.lambda);
  r.kv("accepted", m.accepted);
  r.kv("I", m.I);
  r.kv("IV", m.IV);
  r.kv("field_energy", m.field_energy);
  r.kv("norm2", m.norm2);
  r.kv("K1_plus", m.K1[0]);
  r.kv("K1_minus", m.K1[1]);
  r.kv("Ke_plus", m.Ke[0]);
  r.kv("Ke_minus", m.Ke[1]);
  r.section("mode.residuals");
  const auto& x = m.res;
  r.kv("poisson", x.poisson);
  r.kv("ampere", x.ampere);
  r.kv("flux", x.flux);
  r.kv("flux_wall", x.flux_wall);
  r.kv("vlasov", x.vlasov);
  r.kv("specular", x.specular);
  r.kv("invariant", x.invariant);
  r.kv("casimir", x.casimir);
  r.kv("eigen", x.eigen);
  for (const auto& f : m.failures) r.kv("failure", f);

  c.summary["mode"] = {{"lambda", jnum(m.lambda)},
                       {"accepted", m.accepted},
                       {"residuals",
                        {{"poisson", jnum(x.poisson)},
                         {"ampere", jnum(x.ampere)},
                         {"flux", jnum(x.flux)},
                         {"vlasov", jnum(x.vlasov)},
                         {"specular", jnum(x.specular)},
                         {"invariant", jnum(x.invariant)},
                         {"casimir", jnum(x.casimir)},
                         {"eigen", jnum(x.eigen)}}}};
}

void write_mode_fields(Context& c, const RadialGrid& g, const GrowingMode& m) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < g.n; ++i) rows.push_back({g.r[i], m.phi[i], m.psi[i]});
  auto hdr = c.curve_header;
  hdr.push_back("lambda " + num(m.lambda));
  write_columns(c.dir / "mode.dat", hdr, {"r", "phi", "psi"}, rows);
  rows.clear();
  for (size_t f = 0; f < m.faces.size(); ++f) rows.push_back({m.faces[f], m.flux[f], m.flux_fd[f]});
  write_columns(c.dir / "mode_flux.dat", hdr, {"r_face", "j_r", "lambda_dphi"}, rows);
}

void workflow_verdict(Context& c, const Equilibrium& eq, bool with_mode) {
  const Scenario& s = c.s;
  VerdictOptions vo;
  vo.ops = operator_options(s);
  vo.refine = s.refine;
  vo.band_factor = s.band_factor;
  vo.both_routes = s.cross_check;
  vo.search_mode = with_mode;
  vo.search.lambda_min = s.lambda_min;
  vo.search.lambda_max = s.lambda_max;
  vo.search.scan_points = s.scan_points;
  vo.search.tol = s.lambda_tol;
  vo.search.ops = vo.ops;
  vo.mode.orbit.rin_per_cell = s.rin_per_cell;
  c.log("verdict at n = " + std::to_string(s.n));
  StabilityReport rep = verdict(eq, vo);

  Report& r = c.rep;
  r.section("verdict");
  r.kv("verdict", rep.verdict);
  r.kv("kappa0", rep.kappa0);
  r.kv("kappa0_fine", rep.kappa0_fine);
  r.kv("n", rep.n);
  r.kv("n_fine", rep.n_fine);
  r.kv("margin", rep.margin);
  r.kv("refinement_shift", rep.n_fine ? std::abs(rep.kappa0 - rep.kappa0_fine) : NAN);
  r.kv("projection", rep.projection);
  r.kv("kappa0_explicit", rep.kappa0_explicit);
  r.kv("kappa0_orbit", rep.kappa0_orbit);
  r.kv("routes_disagree", rep.routes_disagree);
  for (const auto& n : rep.notes) r.kv("note", n);
  diag_block(r, "operators", rep.diag);

  c.summary["verdict"] = {{"verdict", rep.verdict},
                          {"kappa0", jnum(rep.kappa0)},
                          {"kappa0_fine", jnum(rep.kappa0_fine)},
                          {"margin", jnum(rep.margin)},
                          {"projection", rep.projection},
                          {"kappa0_explicit", jnum(rep.kappa0_explicit)},
                          {"kappa0_orbit", jnum(rep.kappa0_orbit)},
                          {"routes_disagree", rep.routes_disagree}};
  c.summary["operators"] = diag_json(rep.diag);
  c.summary["notes"] = rep.notes;
  certificates_block(c, rep.certificates);

  std::vector<std::vector<double>> rows;
  for (int i = 0; i < eq.grid.n; ++i) rows.push_back({eq.grid.r[i], rep.psi0[i]});
  auto hdr = c.curve_header;
  hdr.push_back("kappa0 " + num(rep.kappa0));
  write_columns(c.dir / "eigenvector0.dat", hdr, {"r", "psi"}, rows);

  if (rep.mode_searched) {
    r.section("lambda_search");
    r.kv("found", rep.search.found);
    r.kv("lambda_star", rep.search.lambda_star);
    r.kv("kappa_star", rep.search.kappa_star);
    r.kv("iterations", rep.search.iterations);
    r.kv("bracketed", rep.search.curve.bracketed);
    r.kv("lambda_lo", rep.search.curve.lambda_lo);
    r.kv("lambda_hi", rep.search.curve.lambda_hi);
    r.kv("kappa_limit_fit", rep.kappa_limit_fit);
    for (const auto& w : rep.search.warnings) r.kv("warning", w);
    c.summary["lambda_search"] = {{"found", rep.search.found},
                                  {"lambda_star", jnum(rep.search.lambda_star)},
                                  {"kappa_star", jnum(rep.search.kappa_star)},
                                  {"iterations", rep.search.iterations}};
    rows.clear();
    for (const auto& p : rep.search.curve.sorted()) rows.push_back({p.lambda, p.kappa});
    write_columns(c.dir / "spectral_curve.dat", c.curve_header, {"lambda", "kappa"}, rows);
  } else if (with_mode) {
    r.section("lambda_search");
    r.kv("skipped", "verdict is " + rep.verdict);
  }
  if (rep.has_mode) {
    mode_block(c, rep.mode);
    write_mode_fields(c, eq.grid, rep.mode);
  }
}

void workflow_certificates(Context& c, const Equilibrium& eq) {
  OperatorSet ops = assemble_operators(eq, 0.0, operator_options(c.s));
  KappaResult k = kappa(ops);
  c.rep.section("kappa");
  c.rep.kv("kappa0", k.kappa);
  c.rep.kv("projection", ops.diag.strategy);
  c.summary["kappa0"] = jnum(k.kappa);
  diag_block(c.rep, "operators", ops.diag);
  c.summary["operators"] = diag_json(ops.diag);
  certificates_block(c, theorem_certificates(eq, ops));
  Eigen::VectorXd ps = build_psi_star(eq.grid);
  BoundA2Terms b = boundA2_terms(eq, ops, ps);
  Report& r = c.rep;
  r.section("psi_star_form");
  r.kv("form", b.form);
  r.kv("bound", b.bound);
  r.kv("I", b.I);
  r.kv("IIA", b.IIA);
  r.kv("IIIA", b.IIIA);
  r.kv("IIB", b.IIB);
  r.kv("IIIB", b.IIIB);
  r.kv("bound_holds", b.holds);
  c.summary["psi_star_form"] = {{"form", jnum(b.form)}, {"bound", jnum(b.bound)}, {"holds", b.holds}};
}

void workflow_diagnostics(Context& c, const Equilibrium& eq) {
  const Scenario& s = c.s;
  Report& r = c.rep;
  NetSpec net;
  net.phi_shift = eq.sup_phi();
  net.psi_shift = eq.sup_psi();
  AdmissibilityReport adm = check_admissible(eq.profile, 4000, net);
  r.section("admissibility");
  r.kv("pass", adm.pass);
  r.kv("samples", adm.samples);
  r.header({"clause", "pass", "worst", "e", "p", "sigma"});
  json clauses = json::array();
  for (const auto& cl : adm.clauses) {
    std::string name = cl.clause;
    for (auto& ch : name)
      if (ch == ' ') ch = '_';
    r.row({name, yes(cl.pass), num(cl.worst), num(cl.e), num(cl.p), std::to_string(cl.sigma)});
    clauses.push_back({{"clause", cl.clause}, {"pass", cl.pass}, {"worst", jnum(cl.worst)}});
  }
  SymmetryCheck sym = check_species_symmetry(eq.profile, net);
  r.kv("species_symmetry_mu", sym.mu_defect);
  r.kv("species_symmetry_mu_p", sym.mu_p_defect);
  c.summary["admissibility"] = {{"pass", adm.pass}, {"clauses", clauses}};

  if (!eq.homogeneous() && eq.grid.scheme == GridScheme::FiniteDifference) {
    NewtonCheck nc = newton_crosscheck(eq);
    r.section("equilibrium_crosscheck");
    r.kv("newton_converged", nc.converged);
    r.kv("newton_iterations", nc.iterations);
    r.kv("max_diff", nc.max_diff);
    c.summary["equilibrium_crosscheck"] = {{"converged", nc.converged}, {"max_diff", jnum(nc.max_diff)}};
  }

  r.section("dispatch");
  r.kv("strategy", to_string(dispatch_strategy(eq)));

  json arr = json::array();
  std::vector<std::vector<double>> rows;
  for (double lam : s.diag_lambdas) {
    OperatorOptions oo = operator_options(s);
    if (lam > 0 && oo.projection == ProjectionMode::Explicit) oo.projection = ProjectionMode::Orbit;
    c.log("operators at lambda = " + num(lam));
    OperatorSet ops = assemble_operators(eq, lam, oo);
    KappaResult k = kappa(ops);
    diag_block(r, "operators.lambda=" + num(lam), ops.diag);
    r.kv("kappa", k.kappa);
    json d = diag_json(ops.diag);
    d["lambda"] = lam;
    d["kappa"] = jnum(k.kappa);
    arr.push_back(d);
    rows.push_back({lam, k.kappa, ops.diag.defect_A1, ops.diag.defect_A2, ops.diag.defect_L});
    if (s.dump_matrices) {
      std::ofstream out(c.dir / ("operators_lambda_" + num(lam) + ".txt"), std::ios::binary);
      dump_matrix(out, "A1", ops.A1);
      dump_matrix(out, "A2", ops.A2);
      dump_matrix(out, "B", ops.B);
      dump_matrix(out, "Bstar", ops.Bstar);
      dump_matrix(out, "L", ops.L);
      if (!out) throw Error("cli", "cannot write matrix dump");
    }
  }
  c.summary["operators"] = arr;
  write_columns(c.dir / "diagnostics.dat", c.curve_header, {"lambda", "kappa", "defect_A1", "defect_A2", "defect_L"},
                rows);
}

void workflow_sweep(Context& c) {
  const Scenario& s = c.s;
  Profile base = make_profile(s.profile, s.params);
  SweepOptions so;
  so.n = s.n;
  so.quad_tol = s.quad_tol;
  so.quad_level = s.quad_level;
  so.ops = operator_options(s);
  so.eq.tol = s.eq_tol;
  so.eq.max_iter = s.eq_max_iter;
  so.K_rel_tol = s.sweep_rel_tol;
  so.bisect = s.sweep_bisect;
  Scaling sc = parse_scaling(s.sweep_scaling);
  SweepFamily fam = parse_family(s.sweep_family);
  c.log("sweep over " + std::to_string(s.sweep_values.size()) + " K values");
  SweepResult res = sweep_K(base, sc, s.sweep_values, fam, so);

  Report& r = c.rep;
  r.section("sweep");
  r.kv("family", to_string(fam));
  r.kv("scaling", to_string(sc));
  r.kv("K_star_form", res.K_star_form);
  r.kv("K_star_kappa", res.K_star_kappa);
  for (const auto& n : res.notes) r.kv("note", n);
  r.header({"K", "form", "kappa0", "rayleigh", "sup_psi0", "bound", "bound_holds", "verdict"});
  json pts = json::array();
  std::vector<std::vector<double>> rows;
  for (const auto& p : res.points) {
    const bool dm = fam == SweepFamily::DirichletMagnetic;
    r.row({num(p.K), num(p.form), num(p.kappa0), num(p.rayleigh), num(p.sup_psi0), dm ? num(p.bound.bound) : "nan",
           dm ? yes(p.bound.holds) : "n/a", p.verdict});
    pts.push_back({{"K", p.K},
                   {"form", jnum(p.form)},
                   {"kappa0", jnum(p.kappa0)},
                   {"sup_psi0", jnum(p.sup_psi0)},
                   {"verdict", p.verdict}});
    rows.push_back({p.K, p.form, p.kappa0, p.rayleigh, p.sup_psi0, dm ? p.bound.bound : NAN});
  }
  c.summary["sweep"] = {{"family", to_string(fam)},
                        {"scaling", to_string(sc)},
                        {"K_star_form", jnum(res.K_star_form)},
                        {"K_star_kappa", jnum(res.K_star_kappa)},
                        {"points", pts}};
  auto hdr = c.curve_header;
  hdr.push_back("family " + to_string(fam) + " scaling " + to_string(sc));
  hdr.push_back("K_star_form " + num(res.K_star_form) + " K_star_kappa " + num(res.K_star_kappa));
  write_columns(c.dir / "sweep.dat", hdr, {"K", "form", "kappa0", "rayleigh", "sup_psi0", "bound"}, rows);
}

}  // namespace

Equilibrium build_equilibrium(const Scenario& s) {
  Profile prof = build_profile(s);
  RadialGrid g = build_grid(s.n);
  VelocityQuadOptions qo;
  qo.tol = s.quad_tol;
  qo.level = s.quad_level;
  VelocityQuad quad = build_velocity_quad(prof, qo);
  EquilibriumOptions eo;
  eo.tol = s.eq_tol;
  eo.max_iter = s.eq_max_iter;
  if (s.kind == "homogeneous") return homogeneous_equilibrium(prof, g, quad);
  auto solve = [&](const VelocityQuad& q) {
    return s.kind == "dirichlet" ? solve_psi0_dirichlet(prof, g, q, eo) : solve_equilibrium(prof, s.alpha, s.beta, g, q, eo);
  };
  Equilibrium eq = solve(quad);
  // the tail of the velocity rule has to cover the field shifts of the solved equilibrium
  if (eq.sup_phi() > 0 || eq.sup_psi() > 0) {
    qo.phi_allow = eq.sup_phi();
    qo.psi_allow = eq.sup_psi();
    VelocityQuad q2 = build_velocity_quad(prof, qo);
    if (q2.vmax != quad.vmax) eq = solve(q2);
  }
  return eq;
}

CostEstimate estimate_cost(const Scenario& s) {
  CostEstimate e;
  e.n = s.n;
  Profile prof = build_profile(s);
  VelocityQuadOptions qo;
  qo.tol = s.quad_tol;
  qo.level = s.quad_level;
  VelocityQuad quad = build_velocity_quad(prof, qo);
  e.velocity_nodes = static_cast<long>(quad.size());
  e.operator_entries = static_cast<long>(s.n) * s.n;
  e.orbit_form_entries = 4L * s.n * s.n;
  // labels: species x sign of v_theta x Gauss nodes per knot cell, each carrying the speed nodes
  e.orbits_per_assembly = prof.vacuum() ? 0 : 4L * (s.n + 1) * s.rin_per_cell * static_cast<long>(quad.speed.size());

  // explicit formulas exist at lambda = 0 when E0 = 0: homogeneous and dirichlet kinds, or a
  // species-symmetric profile with alpha = 0 (phi0 stays zero)
  const bool e0_zero = s.kind != "volterra" || (s.alpha == 0 && check_species_symmetry(prof).holds());
  const bool explicit0 = s.projection != ProjectionMode::Orbit && e0_zero;
  e.projection = prof.vacuum() ? "vacuum" : explicit0 ? "explicit" : "orbit";

  long orbit_n = 0, orbit_2n = 0;  // orbit-route assemblies on n and 2n grids
  int evals = 0;
  if (s.workflow == "sweep") {
    int count = static_cast<int>(s.sweep_values.size());
    if (s.sweep_bisect) count += 2 * static_cast<int>(std::ceil(std::log2(1.0 / s.sweep_rel_tol)));
    evals = count;
    orbit_n = explicit0 ? 0 : evals;
  } else if (s.workflow == "diagnostics") {
    for (double l : s.diag_lambdas) {
      ++evals;
      if (l > 0 || !explicit0) ++orbit_n;
    }
  } else {
    evals = 1;
    if (!explicit0) ++orbit_n;
    if (s.workflow != "certificates") {
      if (s.refine) {
        ++evals;
        if (!explicit0) ++orbit_2n;
      }
      if (s.cross_check && e0_zero && !prof.vacuum()) {
        ++evals;
        ++orbit_n;
      }
    }
    if (s.workflow == "mode") {
      // geometric scan plus the root finder, an upper bound
      const int search = s.scan_points + 40;
      evals += search;
      orbit_n += search + 1;  // + mode reconstruction sweep
      ModeOptions mo;
      e.trajectory_integrations = 2L * 2 * mo.vlasov_samples + 2L * mo.specular_samples;
    }
  }
  e.lambda_evaluations = evals;
  e.q_lambda_orbits = orbit_n * e.orbits_per_assembly + orbit_2n * 2 * e.orbits_per_assembly;
  if (prof.vacuum()) e.q_lambda_orbits = 0;

  if (s.lambda_min < 1e-2 && s.workflow == "mode")
    e.warnings.push_back("lambda_min = " + num(s.lambda_min) +
                         " is below 1e-2: extrapolation regime, Q_lambda approaches the kernel projection slowly");
  if (s.lambda_min < 1e-2 && s.workflow != "mode")
    e.warnings.push_back("lambda_min = " + num(s.lambda_min) + " is below 1e-2 (extrapolation regime); unused by this workflow");
  if (!explicit0 && s.n > 64 && !prof.vacuum())
    e.warnings.push_back("orbit-route assembly at n = " + std::to_string(s.n) + " is expensive");
  return e;
}

void run_workflow(const Scenario& s, const fs::path& dir, bool verbose) {
  Context c{s, dir, verbose, {}, json::object(), hex64(fnv1a(s.text)), {}};
  header_block(c);
  auto t0 = std::chrono::steady_clock::now();
  if (s.workflow == "sweep") {
    workflow_sweep(c);
  } else {
    c.log("solving the equilibrium");
    Equilibrium eq = build_equilibrium(s);
    equilibrium_block(c, eq);
    if (s.workflow == "verdict") workflow_verdict(c, eq, false);
    else if (s.workflow == "mode") workflow_verdict(c, eq, true);
    else if (s.workflow == "certificates") workflow_certificates(c, eq);
    else workflow_diagnostics(c, eq);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(dir / "report.txt", c.rep.str());
  write_file(dir / "summary.json", c.summary.dump(2) + "\n");
  // wall time lives apart from the reproducible files
  write_file(dir / "timing.txt", "seconds = " + num(secs) + "\n");
}

fs::path resolve_output_root(const Scenario& s, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!s.out_dir.empty()) {
    fs::path p(s.out_dir);
    if (p.is_relative() && s.path.find('/') != std::string::npos) p = fs::path(s.path).parent_path() / p;
    return p;
  }
  if (const char* env = std::getenv("VMSTAB_OUTPUT_DIR"); env && *env) return env;
  return "vmstab-out";
}

fs::path run_staged(const Scenario& s, const fs::path& root, bool verbose) {
  fs::create_directories(root);
  const fs::path final_dir = root / s.name;
  const fs::path stage = root / ("." + s.name + ".staging-" + std::to_string(::getpid()));
  fs::remove_all(stage);
  fs::create_directories(stage);
  try {
    run_workflow(s, stage, verbose);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    throw;
  }
  fs::remove_all(final_dir);
  fs::rename(stage, final_dir);
  return final_dir;
}

}  // namespace vmstab::cli
