#include "vmstab/trajectories.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "vmstab/common.hpp"
#include "vmstab/parallel.hpp"
#include "vmstab/quadrature.hpp"

namespace vmstab {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 4>;

PhasePoint reflect(const PhasePoint& z) {
  if (std::abs(z.r - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "reflect called away from the wall (r = " << z.r << ")";
    throw Error("trajectories", os.str());
  }
  return {z.r, -z.vr, z.vt};
}

double particle_energy(const Equilibrium& eq, int sigma, const PhasePoint& z) {
  return momentum_factor(z.vr, z.vt) + sigma * eq.Phi(std::min(z.r, 1.0));
}

double particle_momentum(const Equilibrium& eq, int sigma, const PhasePoint& z) {
  return z.r * (z.vt + sigma * eq.S(std::min(z.r, 1.0)));
}

namespace {

struct Rhs {
  const Equilibrium* eq;
  int sigma;
  double dir;
  void operator()(const State& y, State& dy, double) const {
    double g = std::sqrt(1 + y[2] * y[2] + y[3] * y[3]);
    double ux = y[2] / g, uy = y[3] / g;
    double r = std::hypot(y[0], y[1]);
    double rc = std::min(r, 1.0);
    double Er = eq->Er(rc), B = eq->B(rc);
    double ex = r > 0 ? y[0] / r : 0.0, ey = r > 0 ? y[1] / r : 0.0;
    dy[0] = dir * ux;
    dy[1] = dir * uy;
    dy[2] = dir * sigma * (Er * ex + B * uy);
    dy[3] = dir * sigma * (Er * ey - B * ux);
  }
};

PhasePoint to_polar(const State& y) {
  double r = std::hypot(y[0], y[1]);
  if (r == 0) return {0.0, std::hypot(y[2], y[3]), 0.0};
  double nx = y[0] / r, ny = y[1] / r;
  return {r, y[2] * nx + y[3] * ny, (y[0] * y[3] - y[1] * y[2]) / r};
}

bool wall_reflect(State& y, double grazing) {
  double r = std::hypot(y[0], y[1]);
  y[0] /= r;
  y[1] /= r;
  double vn = y[2] * y[0] + y[3] * y[1];
  // grazing: reflection is the identity up to |v_r|; drop the residue instead of flipping it
  if (std::abs(vn) < grazing) {
    y[2] -= vn * y[0];
    y[3] -= vn * y[1];
    return false;
  }
  y[2] -= 2 * vn * y[0];
  y[3] -= 2 * vn * y[1];
  return true;
}

}  // namespace

Trajectory walk(const Equilibrium& eq, int sigma, const PhasePoint& z, double s_end, const TrajectoryOptions& opt,
                const SegmentFn& seg) {
  if (!std::isfinite(z.r) || !std::isfinite(z.vr) || !std::isfinite(z.vt) || z.r < 0 || z.r > 1 + 1e-12)
    throw Error("trajectories", "invalid phase point");
  Trajectory tr;
  tr.species = sigma;
  const double dir = s_end >= 0 ? 1.0 : -1.0;
  const double T = std::abs(s_end);
  Rhs rhs{&eq, sigma, dir};
  State y{z.r, 0.0, z.vr, z.vt};
  const double e0 = particle_energy(eq, sigma, z), p0 = particle_momentum(eq, sigma, z);
  auto track = [&](double t, const State& st, bool refl) {
    PhasePoint q = to_polar(st);
    tr.e_drift = std::max(tr.e_drift, std::abs(particle_energy(eq, sigma, q) - e0));
    tr.p_drift = std::max(tr.p_drift, std::abs(particle_momentum(eq, sigma, q) - p0));
    if (opt.record) tr.samples.push_back({dir * t, q, refl});
  };
  track(0.0, y, false);
  if (z.r >= 1 - 1e-13 && dir * z.vr > 0 && T > 0) {
    if (wall_reflect(y, opt.grazing)) {
      ++tr.reflections;
      track(0.0, y, true);
    }
  }
  auto stepper = odeint::make_dense_output(opt.tol, opt.tol, odeint::runge_kutta_dopri5<State>());
  double dt = 1e-3;
  stepper.initialize(y, 0.0, dt);
  double t = 0;
  bool go = true;
  while (go && t < T) {
    if (++tr.steps > opt.max_steps) {
      PhasePoint q = to_polar(stepper.current_state());
      std::ostringstream os;
      os << "step budget exhausted at s = " << dir * t << " (r = " << q.r << ", v_r = " << q.vr << ")";
      throw Error("trajectories", os.str());
    }
    stepper.do_step(rhs);
    double t0 = stepper.previous_time(), t1 = stepper.current_time();
    if (t1 - t0 < 1e-14 * std::max(1.0, t1)) {
      PhasePoint q = to_polar(stepper.current_state());
      std::ostringstream os;
      os << "step-size collapse at s = " << dir * t1 << " (r = " << q.r << ", v_r = " << q.vr << ")";
      throw Error("trajectories", os.str());
    }
    State st;
    auto at_t = [&](double tt) {
      State s2;
      stepper.calc_state(tt, s2);
      return s2;
    };
    double r1 = std::hypot(stepper.current_state()[0], stepper.current_state()[1]);
    if (r1 > 1.0) {
      auto f = [&](double tt) {
        State s2 = at_t(tt);
        return std::hypot(s2[0], s2[1]) - 1.0;
      };
      double tw = (f(t0) >= 0) ? t0 : brent_root(f, t0, t1, 1e-15 * std::max(1.0, t1), 300);
      double tend = std::min(tw, T);
      if (seg) {
        auto at = [&](double s) { return to_polar(at_t(std::abs(s))); };
        go = seg(dir * t0, dir * tend, at);
      }
      if (tw >= T) {
        st = at_t(T);
        t = T;
        if (opt.record) track(T, st, false);
        y = st;
        break;
      }
      st = at_t(tw);
      if (std::abs(std::hypot(st[0], st[1]) - 1.0) > opt.event_tol) {
        std::ostringstream os;
        os << "wall event not resolved to " << opt.event_tol << " at s = " << dir * tw;
        throw Error("trajectories", os.str());
      }
      bool refl = wall_reflect(st, opt.grazing);
      if (refl) ++tr.reflections;
      track(tw, st, refl);
      t = tw;
      y = st;
      dt = std::max(1e-6, (t1 - t0) * 0.5);
      stepper.initialize(y, t, dt);
      continue;
    }
    double tend = std::min(t1, T);
    if (seg) {
      auto at = [&](double s) { return to_polar(at_t(std::abs(s))); };
      go = seg(dir * t0, dir * tend, at);
    }
    if (t1 >= T) {
      st = at_t(T);
      y = st;
      t = T;
      track(T, st, false);
      break;
    }
    t = t1;
    y = stepper.current_state();
    if (opt.record) track(t, y, false);
  }
  tr.end = to_polar(y);
  if (!opt.record) {
    tr.e_drift = std::max(tr.e_drift, std::abs(particle_energy(eq, sigma, tr.end) - e0));
    tr.p_drift = std::max(tr.p_drift, std::abs(particle_momentum(eq, sigma, tr.end) - p0));
  }
  return tr;
}

Trajectory integrate(const Equilibrium& eq, int sigma, const PhasePoint& z, double s_end,
                     const TrajectoryOptions& opt) {
  return walk(eq, sigma, z, s_end, opt, nullptr);
}

std::vector<double> q_lambda_many(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                                  const PhasePoint& z, double tol, const TrajectoryOptions& opt_in) {
  if (!(lambda > 0)) throw Error("trajectories", "q_lambda needs lambda > 0");
  const double S = -std::log(tol) / lambda;
  const GaussRule& gl = gauss_legendre(8);
  std::vector<double> acc(gs.size(), 0.0);
  TrajectoryOptions opt = opt_in;
  opt.record = false;
  auto seg = [&](double s0, double s1, const std::function<PhasePoint(double)>& at) {
    // s runs from s0 down to s1 (both <= 0); tau = -s
    double t0 = -s0, t1 = -s1;
    double len = t1 - t0;
    if (len <= 0) return true;
    int pieces = std::max(1, static_cast<int>(std::ceil(std::max(lambda * len, len / 0.25))));
    for (int k = 0; k < pieces; ++k) {
      double a = t0 + len * k / pieces, b = t0 + len * (k + 1) / pieces;
      for (size_t q = 0; q < gl.x.size(); ++q) {
        double tau = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[q];
        double wt = 0.5 * (b - a) * gl.w[q] * lambda * std::exp(-lambda * tau);
        PhasePoint p = at(-tau);
        for (size_t j = 0; j < gs.size(); ++j) acc[j] += wt * gs[j](p);
      }
    }
    return true;
  };
  walk(eq, sigma, z, -S, opt, seg);
  double norm = 1.0 - std::exp(-lambda * S);
  for (double& a : acc) a /= norm;
  return acc;
}

QLambdaResult q_lambda(const Equilibrium& eq, int sigma, double lambda, const PhaseFn& g, const PhasePoint& z,
                       double tol, const TrajectoryOptions& opt) {
  QLambdaResult r;
  r.horizon = -std::log(tol) / lambda;
  r.value = q_lambda_many(eq, sigma, lambda, {g}, z, tol, opt)[0];
  r.tail_bound = tol;
  return r;
}

SpecularityReport check_specularity(const Equilibrium& eq, int sigma, const PhaseFn& g, double s, int samples,
                                    unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  SpecularityReport rep;
  rep.samples = samples;
  for (int k = 0; k < samples; ++k) {
    double vr = std::abs(U(rng)) + 0.05, vt = U(rng);
    PhasePoint a{1.0, vr, vt}, b{1.0, -vr, vt};
    rep.input_defect = std::max(rep.input_defect, std::abs(g(a) - g(b)));
    Trajectory ta = integrate(eq, sigma, a, s), tb = integrate(eq, sigma, b, s);
    rep.transported_defect = std::max(rep.transported_defect, std::abs(g(ta.end) - g(tb.end)));
  }
  return rep;
}

AdjointReport check_adjoint(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                            const std::vector<PhaseFn>& hs, const AdjointQuad& q, const TrajectoryOptions& opt) {
  if (gs.size() != hs.size()) throw Error("trajectories", "check_adjoint: g and h lists differ in length");
  const size_t np = gs.size();
  std::vector<double> rx, rw;
  gauss_on(q.radial, 0.0, 1.0, rx, rw);
  std::vector<double> sx, sw;
  {
    std::vector<double> edges{0.0};
    for (double b = 1.0; b < q.vmax; b *= 2) edges.push_back(b);
    edges.push_back(q.vmax);
    std::vector<double> x, w;
    for (size_t k = 0; k + 1 < edges.size(); ++k) {
      gauss_on(q.speed, edges[k], edges[k + 1], x, w);
      sx.insert(sx.end(), x.begin(), x.end());
      sw.insert(sw.end(), w.begin(), w.end());
    }
  }
  const size_t nr = rx.size(), ns = sx.size(), na = static_cast<size_t>(q.angles);
  const size_t total = nr * ns * na;
  // h~(x, v) = h(x, v~)
  std::vector<PhaseFn> ht;
  for (const PhaseFn& h : hs) ht.push_back([h](const PhasePoint& y) { return h(PhasePoint{y.r, -y.vr, y.vt}); });
  const int chunks = kReductionChunks;
  std::vector<std::vector<double>> L(chunks, std::vector<double>(np, 0.0)), R = L;
  parallel_chunks(total, chunks, [&](size_t lo, size_t hi, int c) {
    for (size_t idx = lo; idx < hi; ++idx) {
      size_t i = idx / (ns * na), j = (idx / na) % ns, k = idx % na;
      double th = 2 * kPi * (k + 0.5) / na;
      double s = sx[j];
      PhasePoint z{rx[i], s * std::cos(th), s * std::sin(th)};
      PhasePoint zt{z.r, -z.vr, z.vt};
      MuEval mu = eq.profile.eval(sigma, particle_energy(eq, sigma, z), particle_momentum(eq, sigma, z));
      if (mu.mu_e == 0) continue;
      double w = 2 * kPi * rx[i] * rw[i] * sw[j] * s * (2 * kPi / na) * mu.mu_e;
      std::vector<double> Qg = q_lambda_many(eq, sigma, lambda, gs, z, q.tail_tol, opt);
      std::vector<double> Qh = q_lambda_many(eq, sigma, lambda, ht, z, q.tail_tol, opt);
      for (size_t m = 0; m < np; ++m) {
        L[c][m] += w * hs[m](z) * Qg[m];
        R[c][m] += w * gs[m](zt) * Qh[m];
      }
    }
  });
  AdjointReport rep;
  rep.trajectories = static_cast<long>(2 * total);
  rep.pairs.resize(np);
  for (size_t m = 0; m < np; ++m) {
    AdjointPair& p = rep.pairs[m];
    for (int c = 0; c < chunks; ++c) {
      p.lhs += L[c][m];
      p.rhs += R[c][m];
    }
    double sc = std::max(std::abs(p.lhs), std::abs(p.rhs));
    p.rel_defect = sc > 0 ? std::abs(p.lhs - p.rhs) / sc : 0.0;
    rep.worst = std::max(rep.worst, p.rel_defect);
  }
  return rep;
}

}  // namespace vmstab
