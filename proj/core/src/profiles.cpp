#include "vmstab/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vmstab/common.hpp"

namespace vmstab {

MuFn finite_difference_derivatives(ScalarFn2 mu) {
  return [mu = std::move(mu)](double e, double p) {
    MuEval r;
    r.mu = mu(e, p);
    double he = 1e-5 * (1.0 + std::abs(e));
    double hp = 1e-5 * (1.0 + std::abs(p));
    r.mu_e = (mu(e + he, p) - mu(e - he, p)) / (2 * he);
    r.mu_p = (mu(e, p + hp) - mu(e, p - hp)) / (2 * hp);
    return r;
  };
}

Profile::Profile(std::string name, MuFn plus, MuFn minus, double gamma)
    : name_(std::move(name)), plus_(std::move(plus)), minus_(std::move(minus)), gamma_(gamma) {}

double estimate_decay_constant(const Profile& prof, double gamma, double vmax, int ns, int np) {
  double C = 0;
  for (int i = 0; i < ns; ++i) {
    double s = vmax * i / (ns - 1);
    double e = std::sqrt(1 + s * s);
    double w = 1 + std::pow(e, gamma);
    for (int j = 0; j < np; ++j) {
      double p = -s + 2 * s * j / (np - 1);
      for (int sg : {1, -1}) {
        MuEval m = prof.eval(sg, e, p);
        double q = std::abs(m.mu_p) + std::abs(m.mu_e);
        if (m.mu_e != 0) q += m.mu_p * m.mu_p / std::abs(m.mu_e);
        C = std::max(C, q * w);
      }
    }
  }
  return C;
}

namespace {

Profile finish(Profile p) {
  p.set_decay(estimate_decay_constant(p, p.gamma()), p.gamma());
  return p;
}

double getp(const std::map<std::string, double>& m, const std::string& k, double def) {
  auto it = m.find(k);
  return it == m.end() ? def : it->second;
}

}  // namespace

std::vector<std::string> builtin_profile_names() {
  return {"maxwellian", "even_p", "damped", "skewed", "vacuum"};
}

Profile make_profile(const std::string& name, const std::map<std::string, double>& params) {
  double gamma = getp(params, "gamma", 3.0);
  if (gamma <= 2) throw Error("profiles", "decay exponent gamma must exceed 2");
  if (name == "maxwellian") {
    MuFn f = [](double e, double) {
      double x = std::exp(-e);
      return MuEval{x, -x, 0.0};
    };
    Profile p(name, f, f, gamma);
    p.params = params;
    return finish(p);
  }
  if (name == "even_p") {
    MuFn f = [](double e, double p) {
      double x = std::exp(-e);
      double m = x * (1 + 0.5 * p * p);
      return MuEval{m, -m, p * x};
    };
    Profile p(name, f, f, gamma);
    p.set_nu([](double e) { return std::exp(-e); }, 1.0);
    p.params = params;
    return finish(p);
  }
  if (name == "damped") {
    MuFn f = [](double e, double p) {
      double m = std::exp(-e - p * p);
      return MuEval{m, -m, -2 * p * m};
    };
    Profile p(name, f, f, gamma);
    p.params = params;
    return finish(p);
  }
  if (name == "skewed") {
    // e^{-e}(1 + p^2/2 + d p^3/(1+p^2)) for the plus species, mirrored in p for minus
    // (mirror = 0: both species identical, which breaks the species symmetry but keeps E0 = B0 = 0)
    double d = getp(params, "delta", 0.2);
    const bool mirror = getp(params, "mirror", 1.0) != 0.0;
    if (!(std::abs(d) < 1.0)) throw Error("profiles", "skewed: |delta| must be < 1 to keep mu > 0");
    auto plus = [d](double e, double p) {
      double x = std::exp(-e);
      double q = 1 + p * p;
      double m = x * (1 + 0.5 * p * p + d * p * p * p / q);
      double mp = x * (p + d * (3 * p * p + p * p * p * p) / (q * q));
      return MuEval{m, -m, mp};
    };
    MuFn minus = [plus](double e, double p) {
      MuEval r = plus(e, -p);
      r.mu_p = -r.mu_p;
      return r;
    };
    if (!mirror) minus = plus;
    Profile p(name, MuFn(plus), minus, gamma);
    // p mu^-_p = e^{-e} p^2 [1 - d p(3+p^2)/(1+p^2)^2]
    double worst = 0;
    for (int i = 1; i <= 4000; ++i) {
      double x = 10.0 * i / 4000;
      worst = std::max(worst, x * (3 + x * x) / ((1 + x * x) * (1 + x * x)));
    }
    double c0 = 1 - std::abs(d) * worst;
    if (c0 > 0) p.set_nu([](double e) { return std::exp(-e); }, c0);
    p.params = params;
    return finish(p);
  }
  if (name == "vacuum") {
    MuFn f = [](double, double) { return MuEval{0, 0, 0}; };
    Profile p(name, f, f, gamma);
    p.mark_vacuum();
    p.params = params;
    p.set_decay(0, gamma);
    return p;
  }
  std::ostringstream os;
  os << "unknown profile '" << name << "' (known:";
  for (auto& n : builtin_profile_names()) os << " " << n;
  os << ")";
  throw Error("profiles", os.str());
}

Profile scale_amplitude(const Profile& prof, double K) {
  if (!(K > 0)) throw Error("profiles", "scale_amplitude: K must be > 0");
  auto wrap = [K](MuFn f) -> MuFn {
    return [f, K](double e, double p) {
      MuEval m = f(e, p);
      return MuEval{K * m.mu, K * m.mu_e, K * m.mu_p};
    };
  };
  Profile out(prof.name(), wrap(prof.plus()), wrap(prof.minus()), prof.gamma());
  out.params = prof.params;
  out.params["amplitude"] = K * (prof.params.count("amplitude") ? prof.params.at("amplitude") : 1.0);
  out.set_decay(K * prof.C_mu(), prof.gamma());
  if (prof.has_nu()) out.set_nu([prof](double e) { return prof.nu(e); }, K * prof.c0());
  if (prof.vacuum()) out.mark_vacuum();
  return out;
}

Profile scale_momentum(const Profile& prof, double K) {
  if (!(K > 0)) throw Error("profiles", "scale_momentum: K must be > 0");
  auto wrap = [K](MuFn f) -> MuFn {
    return [f, K](double e, double p) {
      MuEval m = f(e, K * p);
      return MuEval{m.mu, m.mu_e, K * m.mu_p};
    };
  };
  Profile out(prof.name(), wrap(prof.plus()), wrap(prof.minus()), prof.gamma());
  out.params = prof.params;
  out.params["momentum_scale"] =
      K * (prof.params.count("momentum_scale") ? prof.params.at("momentum_scale") : 1.0);
  if (prof.has_nu()) out.set_nu([prof](double e) { return prof.nu(e); }, K * K * prof.c0());
  if (prof.vacuum()) {
    out.mark_vacuum();
    out.set_decay(0, prof.gamma());
  } else {
    out.set_decay(estimate_decay_constant(out, prof.gamma()), prof.gamma());
  }
  return out;
}

Profile scale_species(const Profile& prof, double kp, double km) {
  if (!(kp >= 0) || !(km >= 0)) throw Error("profiles", "species amplitudes must be >= 0");
  auto wrap = [](MuFn f, double K) -> MuFn {
    return [f, K](double e, double p) {
      MuEval m = f(e, p);
      return MuEval{K * m.mu, K * m.mu_e, K * m.mu_p};
    };
  };
  Profile out(prof.name(), wrap(prof.plus(), kp), wrap(prof.minus(), km), prof.gamma());
  out.params = prof.params;
  out.params["plus_amplitude"] = kp;
  out.params["minus_amplitude"] = km;
  out.set_decay(std::max(kp, km) * prof.C_mu(), prof.gamma());
  if (prof.has_nu()) out.set_nu([prof](double e) { return prof.nu(e); }, km * prof.c0());
  if (prof.vacuum() || (kp == 0 && km == 0)) out.mark_vacuum();
  return out;
}

AdmissibilityReport check_admissible(const Profile& prof, int sample_count, const NetSpec& net,
                                     unsigned seed) {
  AdmissibilityReport rep;
  int side = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(sample_count) / 6.0)));
  ClauseResult nonneg{"mu >= 0", true, 0, 0, 0, 0};
  ClauseResult sign{"mu_e < 0", true, -1e300, 0, 0, 0};
  ClauseResult decay{"decay bound", true, 0, 0, 0, 0};
  ClauseResult deriv{"derivative consistency", true, 0, 0, 0, 0};
  const double C = prof.C_mu(), g = prof.gamma();

  auto finite_or_throw = [&](const MuEval& m, int sg, double e, double p) {
    if (!std::isfinite(m.mu) || !std::isfinite(m.mu_e) || !std::isfinite(m.mu_p)) {
      std::ostringstream os;
      os << "non-finite profile value at sigma=" << sg << " e=" << e << " p=" << p;
      throw Error("profiles", os.str());
    }
  };

  const double shifts[3] = {-net.phi_shift, 0.0, net.phi_shift};
  for (int i = 0; i < side; ++i) {
    double s = net.vmax * i / (side - 1);
    for (double sh : shifts) {
      double e = std::sqrt(1 + s * s) + sh;
      double pmax = s + net.psi_shift;
      for (int j = 0; j < side; ++j) {
        double p = -pmax + 2 * pmax * j / (side - 1);
        for (int sg : {1, -1}) {
          MuEval m = prof.eval(sg, e, p);
          finite_or_throw(m, sg, e, p);
          ++rep.samples;
          if (-m.mu > nonneg.worst) nonneg = {nonneg.clause, nonneg.pass, -m.mu, e, p, sg};
          if (m.mu < 0) nonneg.pass = false;
          if (m.mu_e > sign.worst) sign = {sign.clause, sign.pass, m.mu_e, e, p, sg};
          if (!(m.mu_e < 0)) sign.pass = false;
          double q = std::abs(m.mu_p) + std::abs(m.mu_e);
          if (m.mu_e != 0)
            q += m.mu_p * m.mu_p / std::abs(m.mu_e);
          else if (m.mu_p != 0)
            q = INFINITY;
          double ratio = q * (1 + std::pow(std::abs(e), g));
          if (ratio > decay.worst) decay = {decay.clause, decay.pass, ratio, e, p, sg};
          if (ratio > C * (1 + 1e-9) + 1e-300) decay.pass = false;
        }
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double emax = std::sqrt(1 + net.vmax * net.vmax);
  int nrand = std::max(20, sample_count / 50);
  for (int k = 0; k < nrand; ++k) {
    double e = 1 + (std::min(emax, 12.0) - 1) * U(rng);
    double p = (2 * U(rng) - 1) * e;
    for (int sg : {1, -1}) {
      MuEval m = prof.eval(sg, e, p);
      finite_or_throw(m, sg, e, p);
      double he = 1e-5 * (1 + std::abs(e)), hp = 1e-5 * (1 + std::abs(p));
      double fe = (prof.mu(sg, e + he, p) - prof.mu(sg, e - he, p)) / (2 * he);
      double fp = (prof.mu(sg, e, p + hp) - prof.mu(sg, e, p - hp)) / (2 * hp);
      double de = std::abs(m.mu_e - fe) / (1 + std::abs(m.mu_e));
      double dp = std::abs(m.mu_p - fp) / (1 + std::abs(m.mu_p));
      double d = std::max(de, dp);
      if (d > deriv.worst) deriv = {deriv.clause, deriv.pass, d, e, p, sg};
      if (d > 1e-5) deriv.pass = false;
    }
  }
  rep.clauses = {nonneg, sign, decay, deriv};
  for (auto& c : rep.clauses) rep.pass = rep.pass && c.pass;
  return rep;
}

SymmetryCheck check_species_symmetry(const Profile& prof, const NetSpec& net, int n) {
  SymmetryCheck out;
  for (int i = 0; i < n; ++i) {
    double s = net.vmax * i / (n - 1);
    double e = std::sqrt(1 + s * s);
    double pmax = s + net.psi_shift;
    for (int j = 0; j < n; ++j) {
      double p = -pmax + 2 * pmax * j / (n - 1);
      MuEval a = prof.eval(1, e, p), b = prof.eval(-1, e, -p);
      out.mu_defect = std::max(out.mu_defect, std::abs(a.mu - b.mu));
      out.mu_p_defect = std::max(out.mu_p_defect, std::abs(a.mu_p + b.mu_p));
    }
  }
  return out;
}

}  // namespace vmstab
