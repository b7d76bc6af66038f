#include "vmstab/orbits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "vmstab/common.hpp"
#include "vmstab/parallel.hpp"
#include "vmstab/quadrature.hpp"

namespace vmstab {

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;

// Gauss collocation on [0,1]: S_jk = A_jk / b_k for the Gauss Runge-Kutta matrix A.
struct Colloc {
  int m = 0;
  std::vector<double> x, w;  // Gauss rule on [-1,1]
  SmallMat S;
};

const Colloc& colloc(int m) {
  static std::mutex mu;
  static std::map<int, Colloc> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  Colloc c;
  c.m = m;
  const GaussRule& g = gauss_legendre(m);
  c.x = g.x;
  c.w = g.w;
  Eigen::MatrixXd V(m, m), C(m, m);
  for (int j = 0; j < m; ++j) {
    double cj = 0.5 * (1 + g.x[j]);
    for (int l = 0; l < m; ++l) {
      V(j, l) = std::pow(cj, l);
      C(j, l) = std::pow(cj, l + 1) / (l + 1);
    }
  }
  // A = C V^{-1}
  Eigen::MatrixXd A = V.transpose().partialPivLu().solve(C.transpose()).transpose();
  c.S.resize(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) c.S(j, k) = A(j, k) / (0.5 * g.w[k]);
  return cache.emplace(m, std::move(c)).first->second;
}

struct Node {
  double r, dt, vt, gam, vr;  // vr = |v_r|
};

struct Piece {
  int first, m, cell;
  bool outbound;
  int tag_start, tag_end;  // face / marker index at the piece ends (-1 none)
};

constexpr int kExtraTag = 1 << 20;

struct Geo {
  int sigma = 1;
  double e = 0, p = 0, rin = 0, rend = 1, delta = 0;
  bool wall = false;
  double a_in = 0, b_in = 0, Fin = 0, Phi_in = 0, S_in = 0;
};

class Builder {
 public:
  Builder(const Equilibrium& eq, const OrbitOptions& opt) : eq_(eq), opt_(opt), cl_(colloc(opt.nodes_per_piece)) {
    const RadialGrid& g = eq.grid;
    knots_ = g.r;
    if (opt.face_breaks && g.scheme == GridScheme::FiniteDifference)
      for (int i = 1; i < g.n; ++i) faces_.push_back(i * g.h);
  }

  const std::vector<double>& faces() const { return faces_; }
  const Colloc& cl() const { return cl_; }

  // v_r^2 on the orbit at r, d = r - r_in
  double F(const Geo& o, double r, double d) const {
    double da = -o.sigma * (eq_.Phi(r) - o.Phi_in);
    double db = -o.p * d / (r * o.rin) - o.sigma * (eq_.S(r) - o.S_in);
    return o.Fin + da * (2 * o.a_in + da) - db * (2 * o.b_in + db);
  }

  void set_inner(Geo& o) const {
    o.Phi_in = eq_.Phi(o.rin);
    o.S_in = eq_.S(o.rin);
    o.a_in = o.e - o.sigma * o.Phi_in;
    o.b_in = o.p / o.rin - o.sigma * o.S_in;
    o.Fin = o.a_in * o.a_in - 1 - o.b_in * o.b_in;
  }

  // outer end: first zero of F above r_in, or the wall
  bool find_outer(Geo& o) const {
    const int N = 48;
    double prev = o.rin;
    double hi = -1;
    for (int k = 1; k <= N; ++k) {
      double r = o.rin + (1 - o.rin) * k / N;
      if (k == N) r = 1.0;
      if (F(o, r, r - o.rin) <= 0) {
        hi = r;
        break;
      }
      prev = r;
    }
    if (hi < 0) {
      o.wall = true;
      o.rend = 1.0;
      o.delta = 1 - o.rin;
      return o.delta > 1e-13;
    }
    double lo = prev;
    if (lo == o.rin) {
      bool ok = false;
      for (int j = 1; j <= 60; ++j) {
        double r = o.rin + (hi - o.rin) * std::ldexp(1.0, -j);
        if (r <= o.rin) break;
        if (F(o, r, r - o.rin) > 0) {
          lo = r;
          ok = true;
          break;
        }
        hi = r;
      }
      if (!ok) return false;
    }
    auto f = [&](double r) { return F(o, r, r - o.rin); };
    o.rend = brent_root(f, lo, hi, 1e-15, 200);
    o.wall = false;
    o.delta = o.rend - o.rin;
    return o.delta > 1e-13;
  }

  double theta_of(const Geo& o, double r) const {
    double d = std::max(0.0, r - o.rin);
    double q = o.wall ? d / (2 * o.delta) : d / o.delta;
    return 2 * std::asin(std::sqrt(std::clamp(q, 0.0, 1.0)));
  }

  // nodes of [ta, tb] on the outbound leg; returns duration
  double fill(const Geo& o, double ta, double tb, Node* out) const {
    const int m = cl_.m;
    double half = 0.5 * (tb - ta), dur = 0;
    for (int j = 0; j < m; ++j) {
      double th = ta + half * (1 + cl_.x[j]);
      double sh = std::sin(0.5 * th);
      double d, drdth;
      if (o.wall) {
        d = 2 * o.delta * sh * sh;
        drdth = o.delta * std::sin(th);
      } else {
        d = o.delta * sh * sh;
        drdth = 0.5 * o.delta * std::sin(th);
      }
      double r = std::min(o.rin + d, 1.0);
      double f = F(o, r, d);
      double a = o.e - o.sigma * eq_.Phi(r);
      double sf = f > 0 ? std::sqrt(f) : 0.0;
      Node nd;
      nd.r = r;
      nd.dt = sf > 0 ? half * cl_.w[j] * a / sf * drdth : 0.0;
      nd.gam = a;
      nd.vt = o.p / r - o.sigma * eq_.S(r);
      nd.vr = sf;
      out[j] = nd;
      dur += nd.dt;
    }
    return dur;
  }

  // full period: outbound pieces then the mirrored inbound pieces
  bool build(Geo& o, double lambda, const std::vector<std::pair<double, int>>& extra, std::vector<Node>& nodes,
             std::vector<Piece>& pieces, double& period) const {
    nodes.clear();
    pieces.clear();
    // near-circular orbits: v_r^2 drowns in the cancellation of O(1) terms
    double noise = 2.2e-16 * (o.a_in * o.a_in + o.b_in * o.b_in + std::abs(o.Fin));
    double dmid = o.wall ? o.delta : 0.5 * o.delta;
    if (!(F(o, std::min(o.rin + dmid, 1.0), dmid) > 1e4 * noise)) return false;
    const double Theta = o.wall ? 0.5 * kPi : kPi;
    std::vector<std::pair<double, int>> br;
    br.reserve(knots_.size() + faces_.size() + extra.size() + 2);
    const double eps = 1e-13;
    auto inside = [&](double r) { return r > o.rin + eps && r < o.rend - eps; };
    for (double k : knots_)
      if (inside(k)) br.push_back({theta_of(o, k), -1});
    for (size_t f = 0; f < faces_.size(); ++f)
      if (inside(faces_[f])) br.push_back({theta_of(o, faces_[f]), static_cast<int>(f)});
    for (auto& ex : extra)
      if (inside(ex.first)) br.push_back({theta_of(o, ex.first), ex.second});
    std::sort(br.begin(), br.end());
    br.push_back({Theta, -1});
    const int m = cl_.m;
    Node buf[8];
    double ta = 0;
    int tag_prev = -1;
    std::vector<Piece> out_pieces;
    std::function<void(double, double, int, int, int)> emit = [&](double a, double b, int ts, int te, int depth) {
      double dur = fill(o, a, b, buf);
      if (lambda * dur > opt_.lambda_dt_max && depth < 30) {
        int q = std::min(64, static_cast<int>(std::ceil(lambda * dur / opt_.lambda_dt_max)));
        for (int k = 0; k < q; ++k)
          emit(a + (b - a) * k / q, a + (b - a) * (k + 1) / q, k == 0 ? ts : -1, k == q - 1 ? te : -1, depth + 1);
        return;
      }
      Piece pc;
      pc.first = static_cast<int>(nodes.size());
      pc.m = m;
      pc.outbound = true;
      pc.tag_start = ts;
      pc.tag_end = te;
      double rm = o.rin + (o.wall ? 2 * o.delta : o.delta) * std::pow(std::sin(0.25 * (a + b)), 2);
      pc.cell = knot_cell(eq_.grid, std::min(rm, 1.0));
      for (int j = 0; j < m; ++j) nodes.push_back(buf[j]);
      out_pieces.push_back(pc);
    };
    for (auto& [tb, tag] : br) {
      if (tb <= ta + 1e-15) {
        if (tag >= 0) tag_prev = tag;
        continue;
      }
      int q = std::max(1, static_cast<int>(std::ceil((tb - ta) / opt_.max_dtheta)));
      for (int k = 0; k < q; ++k) {
        double a = ta + (tb - ta) * k / q, b = ta + (tb - ta) * (k + 1) / q;
        emit(a, b, k == 0 ? tag_prev : -1, k == q - 1 ? tag : -1, 0);
      }
      ta = tb;
      tag_prev = tag;
    }
    if (out_pieces.empty()) return false;
    for (auto& nd : nodes)
      if (!(nd.vr > 0)) return false;
    double leg = 0;
    for (auto& nd : nodes) leg += nd.dt;
    period = 2 * leg;
    if (!(period > 0) || !std::isfinite(period)) return false;
    const int nout = static_cast<int>(nodes.size());
    pieces = out_pieces;
    for (int k = static_cast<int>(out_pieces.size()) - 1; k >= 0; --k) {
      const Piece& src = out_pieces[k];
      Piece pc;
      pc.first = static_cast<int>(nodes.size());
      pc.m = m;
      pc.cell = src.cell;
      pc.outbound = false;
      pc.tag_start = src.tag_end;
      pc.tag_end = src.tag_start;
      for (int j = m - 1; j >= 0; --j) nodes.push_back(nodes[src.first + j]);
      pieces.push_back(pc);
    }
    (void)nout;
    return true;
  }

 private:
  const Equilibrium& eq_;
  OrbitOptions opt_;
  const Colloc& cl_;
  std::vector<double> knots_, faces_;
};

// per-piece collocation factors for G' = lambda (g - G)
struct PieceSolver {
  const Colloc* cl;
  SmallMat Mat;
  Eigen::PartialPivLU<SmallMat> lu;
  SmallVec eta, c;
  double rho = 1;

  void setup(const Node* nd, int m, double lambda) {
    c.resize(m);
    for (int j = 0; j < m; ++j) c[j] = lambda * nd[j].dt;
    Mat = SmallMat::Identity(m, m) + cl->S * c.asDiagonal();
    lu.compute(Mat);
    eta = lu.solve(SmallVec::Ones(m));
    rho = 1 - c.dot(eta);
  }
  // particular node values for forcing g (zero initial value) and the end value
  double particular(const SmallVec& g, SmallVec& P) const {
    SmallVec rhs = cl->S * c.cwiseProduct(g);
    P = lu.solve(rhs);
    return c.dot(g - P);
  }
};

struct HatSet {
  int idx[2];
  int count;
};

inline void neumann_active(const RadialGrid& g, int cell, HatSet& h) {
  if (cell <= 0) {
    h.idx[0] = 0;
    h.count = 1;
  } else if (cell >= g.n) {
    h.idx[0] = g.n - 1;
    h.count = 1;
  } else {
    h.idx[0] = cell - 1;
    h.idx[1] = cell;
    h.count = 2;
  }
}

inline double hat_value(const RadialGrid& g, int cell, int i, double r, bool dirichlet) {
  HatWeights hw = dirichlet ? hat_dirichlet(g, cell, r) : hat_neumann(g, cell, r);
  if (hw.i0 == i) return hw.a0;
  if (hw.i1 == i) return hw.a1;
  return 0.0;
}

struct Label {
  int sigma, b;
  double rin, wr;
};

std::vector<Label> make_labels(const Equilibrium& eq, const OrbitOptions& opt) {
  std::vector<double> k = eq.grid.knots();
  // the period has a square-root singularity as r_in -> 1: grade the last cell geometrically
  std::vector<double> cuts(k.begin(), k.end() - 1);
  double last = k[k.size() - 2];
  for (int j = 1; j <= 6; ++j) cuts.push_back(1 - (1 - last) * std::ldexp(1.0, -j));
  cuts.push_back(1.0);
  std::vector<Label> out;
  for (int sigma : {1, -1})
    for (int b : {1, -1})
      for (size_t c = 0; c + 1 < cuts.size(); ++c) {
        std::vector<double> x, w;
        gauss_on(opt.rin_per_cell, cuts[c], cuts[c + 1], x, w);
        for (size_t q = 0; q < x.size(); ++q) out.push_back({sigma, b, x[q], w[q]});
      }
  return out;
}

// speed panels of the velocity rule (8 Gauss nodes each), optionally split 2^k
std::vector<std::pair<double, double>> speed_panels(const Equilibrium& eq, const OrbitOptions& opt) {
  const VelocityQuad& q = eq.quad;
  const int per = 8;
  std::vector<std::pair<double, double>> out;
  for (size_t p0 = 0; p0 + per <= q.speed.size(); p0 += per) {
    double sum = 0, mid = 0;
    for (int i = 0; i < per; ++i) {
      sum += q.speed_w[p0 + i];
      mid += q.speed[p0 + i] * q.speed_w[p0 + i];
    }
    mid /= sum;
    double lo = mid - 0.5 * sum, hi = mid + 0.5 * sum;
    int split = 1 << std::max(0, opt.speed_refine);
    for (int k = 0; k < split; ++k) out.push_back({lo + (hi - lo) * k / split, lo + (hi - lo) * (k + 1) / split});
  }
  return out;
}

// Speeds for one (sigma, b, r_in) label. Labels are valid where r_in is an inner turning point
// (F'(r_in) > 0). Panels are cut where that changes and where orbits start reaching the wall, since
// the orbit integrals are only piecewise smooth in s.
void label_speeds(const Equilibrium& eq, const Label& L, const std::vector<std::pair<double, double>>& panels,
                  std::vector<double>& s, std::vector<double>& w) {
  s.clear();
  w.clear();
  const double Bi = eq.B(L.rin), dphi = -eq.Er(L.rin);
  const double dPhi1 = eq.Phi(1.0) - eq.Phi(L.rin), Sin = eq.S(L.rin), S1 = eq.S(1.0);
  auto G = [&](double x) { return x * x / L.rin + L.sigma * (L.b * x * Bi - std::sqrt(1 + x * x) * dphi); };
  auto F1 = [&](double x) {
    double a = std::sqrt(1 + x * x) - L.sigma * dPhi1;
    double p = L.rin * (L.b * x + L.sigma * Sin);
    double bb = p - L.sigma * S1;
    return a * a - 1 - bb * bb;
  };
  std::vector<double> x, ww, cut;
  for (auto [lo, hi] : panels) {
    cut.assign({lo});
    for (int which = 0; which < 2; ++which) {
      auto f = [&](double v) { return which == 0 ? G(v) : F1(v); };
      // a few probes so that a pair of roots inside one panel is not missed
      const int probes = 4;
      double xa = lo, fa = f(lo);
      for (int k = 1; k <= probes; ++k) {
        double xb = lo + (hi - lo) * k / probes, fb = f(xb);
        if ((fa > 0) != (fb > 0)) cut.push_back(brent_root(f, xa, xb, 1e-14 * std::max(1.0, hi), 200));
        xa = xb;
        fa = fb;
      }
    }
    cut.push_back(hi);
    std::sort(cut.begin(), cut.end());
    for (size_t k = 0; k + 1 < cut.size(); ++k) {
      double a = cut[k], c = cut[k + 1];
      if (c - a <= 1e-14 * std::max(1.0, c)) continue;
      if (G(0.5 * (a + c)) <= 0) continue;
      gauss_on(8, a, c, x, ww);
      s.insert(s.end(), x.begin(), x.end());
      w.insert(w.end(), ww.begin(), ww.end());
    }
  }
}

// orbit geometry and weight for a label and speed; false if invalid
bool label_orbit(const Equilibrium& eq, const Builder& B, const Label& L, double s, double ws, Geo& o, double& W) {
  o = Geo{};
  o.sigma = L.sigma;
  o.rin = L.rin;
  double as = std::sqrt(1 + s * s);
  o.Phi_in = eq.Phi(L.rin);
  o.S_in = eq.S(L.rin);
  o.e = as + L.sigma * o.Phi_in;
  o.p = L.rin * (L.b * s + L.sigma * o.S_in);
  o.a_in = as;
  o.b_in = L.b * s;
  o.Fin = 0;
  double dphi = -eq.Er(L.rin);
  double Fp = 2 * (s * s / L.rin + L.sigma * (L.b * s * eq.B(L.rin) - as * dphi));
  double J = L.rin * Fp / (2 * as);
  if (!(J > 0)) return false;
  W = 2 * kPi * J * L.wr * ws;
  return B.find_outer(o);
}

}  // namespace

// ---------------------------------------------------------------------------- forms

OrbitForms assemble_orbit_forms(const Equilibrium& eq, double lambda, const OrbitOptions& opt) {
  if (lambda < 0) throw Error("kernelproj", "lambda must be >= 0");
  const RadialGrid& g = eq.grid;
  const int n = g.n, N2 = 2 * n;
  OrbitForms out;
  out.lambda = lambda;
  out.n = n;
  out.K = Eigen::MatrixXd::Zero(N2, N2);
  out.M = Eigen::MatrixXd::Zero(N2, N2);
  out.Npp = Eigen::MatrixXd::Zero(n, n);
  out.Nfp = Eigen::MatrixXd::Zero(n, n);
  if (eq.profile.vacuum()) return out;

  Builder B(eq, opt);
  std::vector<Label> labels = make_labels(eq, opt);
  const auto panels = speed_panels(eq, opt);

  const int chunks = 32;
  struct Acc {
    Eigen::MatrixXd K, M, Npp, Nfp;
    long orbits = 0, skipped = 0, pieces = 0;
  };
  std::vector<Acc> acc(chunks);

  parallel_chunks(labels.size(), chunks, [&](size_t lo, size_t hi, int chunk) {
    Acc& A = acc[chunk];
    A.K = Eigen::MatrixXd::Zero(N2, N2);
    A.M = Eigen::MatrixXd::Zero(N2, N2);
    A.Npp = Eigen::MatrixXd::Zero(n, n);
    A.Nfp = Eigen::MatrixXd::Zero(n, n);
    std::vector<Node> nodes;
    std::vector<Piece> pieces;
    std::vector<double> sp, sw;
    Eigen::VectorXd Ghat = Eigen::VectorXd::Zero(N2), alpha = Eigen::VectorXd::Zero(N2),
                    avg = Eigen::VectorXd::Zero(N2);
    std::vector<char> seen(N2, 0);
    std::vector<int> visited;
    PieceSolver ps;
    ps.cl = &B.cl();
    const int m = opt.nodes_per_piece;
    SmallVec gk[4], Pk[4];
    double endk[4];
    int comp[4];
    for (size_t li = lo; li < hi; ++li) {
      const Label& L = labels[li];
      label_speeds(eq, L, panels, sp, sw);
      for (size_t is = 0; is < sp.size(); ++is) {
        Geo o;
        double W;
        if (!label_orbit(eq, B, L, sp[is], sw[is], o, W)) {
          ++A.skipped;
          continue;
        }
        MuEval mu = eq.profile.eval(L.sigma, o.e, o.p);
        if (mu.mu_e == 0 && mu.mu_p == 0) continue;
        double T;
        if (!B.build(o, lambda, {}, nodes, pieces, T)) {
          ++A.skipped;
          continue;
        }
        ++A.orbits;
        A.pieces += static_cast<long>(pieces.size());
        const double We = W * mu.mu_e, Wp = W * mu.mu_p;
        for (int v : visited) {
          seen[v] = 0;
          Ghat[v] = 0;
          alpha[v] = 0;
          avg[v] = 0;
        }
        visited.clear();
        double scale = 1.0, picum = 1.0;
        for (const Piece& pc : pieces) {
          const Node* nd = &nodes[pc.first];
          HatSet hn, hd;
          neumann_active(g, pc.cell, hn);
          neumann_active(g, pc.cell, hd);
          int na = 0;
          for (int t = 0; t < hn.count; ++t) comp[na++] = hn.idx[t];
          for (int t = 0; t < hd.count; ++t) comp[na++] = n + hd.idx[t];
          for (int a = 0; a < na; ++a) {
            gk[a].resize(m);
            int k = comp[a];
            bool dir = k >= n;
            int i = dir ? k - n : k;
            for (int j = 0; j < m; ++j) {
              double u = hat_value(g, pc.cell, i, nd[j].r, dir);
              gk[a][j] = dir ? u * nd[j].vt / nd[j].gam : u;
            }
            if (!seen[k]) {
              seen[k] = 1;
              visited.push_back(k);
            }
          }
          // local forms
          for (int a = 0; a < na; ++a)
            for (int c2 = 0; c2 < na; ++c2) {
              double s = 0;
              for (int j = 0; j < m; ++j) s += nd[j].dt * gk[a][j] * gk[c2][j];
              A.M(comp[a], comp[c2]) += We * s;
            }
          if (Wp != 0) {
            for (int a = 0; a < hd.count; ++a)
              for (int c2 = 0; c2 < hd.count; ++c2) {
                double s = 0;
                for (int j = 0; j < m; ++j)
                  s += nd[j].dt * nd[j].r * nd[j].vt / nd[j].gam * hat_value(g, pc.cell, hd.idx[a], nd[j].r, true) *
                       hat_value(g, pc.cell, hd.idx[c2], nd[j].r, true);
                A.Npp(hd.idx[a], hd.idx[c2]) += Wp * s;
              }
            for (int a = 0; a < hn.count; ++a)
              for (int c2 = 0; c2 < hd.count; ++c2) {
                double s = 0;
                for (int j = 0; j < m; ++j)
                  s += nd[j].dt * nd[j].r * hat_value(g, pc.cell, hn.idx[a], nd[j].r, false) *
                       hat_value(g, pc.cell, hd.idx[c2], nd[j].r, true);
                A.Nfp(hn.idx[a], hd.idx[c2]) += Wp * s;
              }
          }
          if (lambda == 0) {
            for (int a = 0; a < na; ++a) {
              double s = 0;
              for (int j = 0; j < m; ++j) s += nd[j].dt * gk[a][j];
              avg[comp[a]] += s;
            }
            continue;
          }
          ps.setup(nd, m, lambda);
          for (int a = 0; a < na; ++a) endk[a] = ps.particular(gk[a], Pk[a]);
          for (int a = 0; a < na; ++a) {
            int i = comp[a];
            double co = 0;
            for (int j = 0; j < m; ++j) co += nd[j].dt * gk[a][j] * ps.eta[j];
            double f = We * scale * co;
            for (int v : visited) A.K(i, v) += f * Ghat[v];
            alpha[i] += We * co * picum;
            for (int c2 = 0; c2 < na; ++c2) {
              double s = 0;
              for (int j = 0; j < m; ++j) s += nd[j].dt * gk[a][j] * Pk[c2][j];
              A.K(i, comp[c2]) += We * s;
            }
          }
          scale *= ps.rho;
          picum *= ps.rho;
          if (scale < 1e-100) {
            for (int v : visited) Ghat[v] *= scale;
            scale = 1.0;
          }
          for (int a = 0; a < na; ++a) Ghat[comp[a]] += endk[a] / scale;
        }
        if (lambda == 0) {
          double f = We / T;
          for (int a : visited)
            for (int c2 : visited) A.K(a, c2) += f * avg[a] * avg[c2];
        } else {
          double den = 1 - picum;
          for (int a : visited) {
            if (alpha[a] == 0) continue;
            for (int c2 : visited) A.K(a, c2) += alpha[a] * scale * Ghat[c2] / den;
          }
        }
      }
    }
  });
  for (int c = 0; c < chunks; ++c) {
    if (acc[c].K.size() == 0) continue;
    out.K += acc[c].K;
    out.M += acc[c].M;
    out.Npp += acc[c].Npp;
    out.Nfp += acc[c].Nfp;
    out.orbits += acc[c].orbits;
    out.skipped += acc[c].skipped;
    out.pieces += acc[c].pieces;
  }
  double nk = out.K.norm();
  out.raw_symmetry_defect = nk > 0 ? (out.K - out.K.transpose()).norm() / nk : 0.0;
  return out;
}

// ---------------------------------------------------------------------------- scalar sweeps

namespace {

// periodic solution of G' = lambda (g - G) on the node list; lambda = 0 gives the orbit average.
// Returns node values and the values at the piece ends.
void periodic_scalar(const Builder& B, const std::vector<Node>& nodes, const std::vector<Piece>& pieces,
                     double lambda, double T, const std::vector<double>& g, std::vector<double>& G,
                     std::vector<double>& Gend, std::vector<double>& Gstart) {
  const size_t np = pieces.size();
  G.assign(nodes.size(), 0.0);
  Gend.assign(np, 0.0);
  Gstart.assign(np, 0.0);
  if (lambda == 0) {
    double avg = 0;
    for (size_t k = 0; k < nodes.size(); ++k) avg += nodes[k].dt * g[k];
    avg /= T;
    std::fill(G.begin(), G.end(), avg);
    std::fill(Gend.begin(), Gend.end(), avg);
    std::fill(Gstart.begin(), Gstart.end(), avg);
    return;
  }
  PieceSolver ps;
  ps.cl = &B.cl();
  std::vector<double> Hs(nodes.size()), Pi(nodes.size()), Es(np), Ep(np), Ss(np), Sp(np);
  double gs = 0, pi = 1;
  SmallVec gv, P;
  for (size_t k = 0; k < np; ++k) {
    const Piece& pc = pieces[k];
    const Node* nd = &nodes[pc.first];
    ps.setup(nd, pc.m, lambda);
    gv.resize(pc.m);
    for (int j = 0; j < pc.m; ++j) gv[j] = g[pc.first + j];
    double e = ps.particular(gv, P);
    Ss[k] = gs;
    Sp[k] = pi;
    for (int j = 0; j < pc.m; ++j) {
      Hs[pc.first + j] = ps.eta[j] * gs + P[j];
      Pi[pc.first + j] = ps.eta[j] * pi;
    }
    gs = ps.rho * gs + e;
    pi = ps.rho * pi;
    Es[k] = gs;
    Ep[k] = pi;
  }
  double x = gs / (1 - pi);
  for (size_t k = 0; k < nodes.size(); ++k) G[k] = Hs[k] + x * Pi[k];
  for (size_t k = 0; k < np; ++k) {
    Gend[k] = Es[k] + x * Ep[k];
    Gstart[k] = Ss[k] + x * Sp[k];
  }
}

bool orbit_through(const Equilibrium& eq, const Builder& B, int sigma, const PhasePoint& z, Geo& o) {
  o = Geo{};
  o.sigma = sigma;
  double r0 = std::clamp(z.r, 1e-14, 1.0);
  double gam = momentum_factor(z.vr, z.vt);
  o.e = gam + sigma * eq.Phi(r0);
  o.p = r0 * (z.vt + sigma * eq.S(r0));
  auto Ffull = [&](double r) {
    double a = o.e - sigma * eq.Phi(r);
    double b = o.p / r - sigma * eq.S(r);
    return a * a - 1 - b * b;
  };
  // inner turning point: bracket downwards from r0
  double hi = r0, lo = -1;
  if (std::abs(z.vr) == 0 && r0 > 1e-14) {
    // at a turning point; inner if F increases outward
    double d = 1e-7 * r0;
    if (Ffull(std::min(r0 + d, 1.0)) >= Ffull(std::max(r0 - d, 1e-14))) lo = r0;
  }
  if (lo < 0) {
    double r = r0;
    for (int k = 1; k <= 400; ++k) {
      double rn = k <= 64 ? r0 * (1 - k / 64.0) : r * 0.5;
      if (rn < 1e-14) rn = 1e-14;
      if (Ffull(rn) < 0) {
        auto f = [&](double x) { return Ffull(x); };
        lo = brent_root(f, rn, hi, 1e-15 * std::max(1.0, hi), 200);
        break;
      }
      hi = rn;
      r = rn;
      if (rn <= 1e-14) {
        lo = 1e-14;
        break;
      }
    }
  }
  if (lo < 0) return false;
  o.rin = lo;
  B.set_inner(o);
  if (o.rin <= 1e-14) o.Fin = std::max(o.Fin, 0.0);
  else o.Fin = 0.0;
  return B.find_outer(o);
}

}  // namespace

OrbitInfo orbit_info(const Equilibrium& eq, int sigma, const PhasePoint& z) {
  OrbitOptions opt;
  Builder B(eq, opt);
  Geo o;
  OrbitInfo info;
  if (!orbit_through(eq, B, sigma, z, o)) return info;
  std::vector<Node> nodes;
  std::vector<Piece> pieces;
  double T;
  if (!B.build(o, 0.0, {}, nodes, pieces, T)) return info;
  info.valid = true;
  info.period = T;
  info.r_in = o.rin;
  info.r_out = o.rend;
  info.wall = o.wall;
  return info;
}

std::vector<double> orbit_q(const Equilibrium& eq, int sigma, double lambda, const std::vector<PhaseFn>& gs,
                            const PhasePoint& z, const OrbitOptions& opt) {
  if (lambda < 0) throw Error("kernelproj", "lambda must be >= 0");
  Builder B(eq, opt);
  Geo o;
  std::vector<double> out(gs.size(), 0.0);
  if (!orbit_through(eq, B, sigma, z, o)) {
    // degenerate (circular) orbit: every function is invariant along it
    for (size_t k = 0; k < gs.size(); ++k) out[k] = gs[k](z);
    return out;
  }
  std::vector<Node> nodes;
  std::vector<Piece> pieces;
  double T;
  std::vector<std::pair<double, int>> extra{{z.r, kExtraTag}};
  if (!B.build(o, lambda, extra, nodes, pieces, T)) {
    for (size_t k = 0; k < gs.size(); ++k) out[k] = gs[k](z);
    return out;
  }
  // where is z in time
  int which = -1;
  bool at_end = true;
  if (z.vr > 0 || (z.vr == 0 && z.r > o.rin + 1e-12)) {
    for (size_t k = 0; k < pieces.size(); ++k)
      if (pieces[k].outbound && pieces[k].tag_end == kExtraTag) which = static_cast<int>(k);
    if (which < 0) {
      // z at the outer end of the leg
      for (size_t k = 0; k < pieces.size(); ++k)
        if (pieces[k].outbound) which = static_cast<int>(k);
    }
  } else if (z.vr < 0) {
    for (size_t k = 0; k < pieces.size(); ++k)
      if (!pieces[k].outbound && pieces[k].tag_start == kExtraTag) {
        which = static_cast<int>(k);
        at_end = false;
      }
    if (which < 0) {
      // z at r_in or r_out on the way in: before the first inbound piece or after the last one
      if (z.r >= o.rend - 1e-12) {
        for (size_t k = 0; k < pieces.size(); ++k)
          if (!pieces[k].outbound) {
            which = static_cast<int>(k);
            at_end = false;
            break;
          }
      } else {
        which = static_cast<int>(pieces.size()) - 1;
      }
    }
  } else {
    which = static_cast<int>(pieces.size()) - 1;  // inner turning point, t = 0 = T
  }
  std::vector<double> g(nodes.size()), G, Ge, Gs;
  for (size_t k = 0; k < gs.size(); ++k) {
    for (const Piece& pc : pieces)
      for (int j = 0; j < pc.m; ++j) {
        const Node& nd = nodes[pc.first + j];
        g[pc.first + j] = gs[k](PhasePoint{nd.r, pc.outbound ? nd.vr : -nd.vr, nd.vt});
      }
    periodic_scalar(B, nodes, pieces, lambda, T, g, G, Ge, Gs);
    out[k] = at_end ? Ge[which] : Gs[which];
  }
  return out;
}

double orbit_phase_integral(const Equilibrium& eq, const OrbitIntegrand& f, const OrbitOptions& opt) {
  Builder B(eq, opt);
  std::vector<Label> labels = make_labels(eq, opt);
  const auto panels = speed_panels(eq, opt);
  const int chunks = 32;
  std::vector<double> part(chunks, 0.0);
  parallel_chunks(labels.size(), chunks, [&](size_t lo, size_t hi, int chunk) {
    std::vector<Node> nodes;
    std::vector<Piece> pieces;
    std::vector<double> sp, sw;
    double acc = 0;
    for (size_t li = lo; li < hi; ++li) {
      label_speeds(eq, labels[li], panels, sp, sw);
      for (size_t is = 0; is < sp.size(); ++is) {
        Geo o;
        double W, T;
        if (!label_orbit(eq, B, labels[li], sp[is], sw[is], o, W)) continue;
        if (!B.build(o, 0.0, {}, nodes, pieces, T)) continue;
        double s = 0;
        for (const Piece& pc : pieces)
          for (int j = 0; j < pc.m; ++j) {
            const Node& nd = nodes[pc.first + j];
            s += nd.dt * f(o.sigma, o.e, o.p, PhasePoint{nd.r, pc.outbound ? nd.vr : -nd.vr, nd.vt});
          }
        acc += W * s;
      }
    }
    part[chunk] = acc;
  });
  double total = 0;
  for (double p : part) total += p;
  return total;
}

ModeFunctionals mode_functionals(const Equilibrium& eq, double lambda, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& psi, const OrbitOptions& opt_in) {
  OrbitOptions opt = opt_in;
  opt.face_breaks = true;
  const RadialGrid& g = eq.grid;
  const int n = g.n;
  Builder B(eq, opt);
  std::vector<Label> labels = make_labels(eq, opt);
  const auto panels = speed_panels(eq, opt);
  const int nf = static_cast<int>(B.faces().size());
  const int chunks = 32;
  struct Acc {
    Eigen::VectorXd ch, cu, cha, cua, fl, fla;
    double IV = 0, K1[2] = {0, 0}, Ke[2] = {0, 0}, K1s[2] = {0, 0}, Kes[2] = {0, 0};
  };
  std::vector<Acc> acc(chunks);
  parallel_chunks(labels.size(), chunks, [&](size_t lo, size_t hi, int chunk) {
    Acc& A = acc[chunk];
    A.ch = Eigen::VectorXd::Zero(n);
    A.cu = Eigen::VectorXd::Zero(n);
    A.cha = Eigen::VectorXd::Zero(n);
    A.cua = Eigen::VectorXd::Zero(n);
    A.fl = Eigen::VectorXd::Zero(nf);
    A.fla = Eigen::VectorXd::Zero(nf);
    std::vector<Node> nodes;
    std::vector<Piece> pieces;
    std::vector<double> h, H, He, Hs, phin, psin, sp, sw;
    Eigen::VectorXd chl(n), cul(n);
    for (size_t li = lo; li < hi; ++li) {
      const Label& L = labels[li];
      const int si = L.sigma > 0 ? 0 : 1;
      label_speeds(eq, L, panels, sp, sw);
      for (size_t is = 0; is < sp.size(); ++is) {
        Geo o;
        double W, T;
        if (!label_orbit(eq, B, L, sp[is], sw[is], o, W)) continue;
        MuEval mu = eq.profile.eval(L.sigma, o.e, o.p);
        if (mu.mu_e == 0 && mu.mu_p == 0) continue;
        if (!B.build(o, lambda, {}, nodes, pieces, T)) continue;
        h.resize(nodes.size());
        phin.resize(nodes.size());
        psin.resize(nodes.size());
        for (const Piece& pc : pieces)
          for (int j = 0; j < pc.m; ++j) {
            const Node& nd = nodes[pc.first + j];
            HatWeights hn = hat_neumann(g, pc.cell, nd.r), hd = hat_dirichlet(g, pc.cell, nd.r);
            double fv = hn.a0 * phi[hn.i0] + (hn.i1 >= 0 ? hn.a1 * phi[hn.i1] : 0.0);
            double sv = hd.a0 * psi[hd.i0] + (hd.i1 >= 0 ? hd.a1 * psi[hd.i1] : 0.0);
            phin[pc.first + j] = fv;
            psin[pc.first + j] = sv;
            h[pc.first + j] = nd.vt / nd.gam * sv - fv;
          }
        periodic_scalar(B, nodes, pieces, lambda, T, h, H, He, Hs);
        double iv = 0, k1 = 0, k1a = 0;
        chl.setZero();
        cul.setZero();
        for (const Piece& pc : pieces)
          for (int j = 0; j < pc.m; ++j) {
            int q = pc.first + j;
            const Node& nd = nodes[q];
            double vth = nd.vt / nd.gam;
            double F = mu.mu_e * (phin[q] + H[q]) + nd.r * mu.mu_p * psin[q];
            HatWeights hn = hat_neumann(g, pc.cell, nd.r), hd = hat_dirichlet(g, pc.cell, nd.r);
            chl[hn.i0] += nd.dt * hn.a0 * F;
            if (hn.i1 >= 0) chl[hn.i1] += nd.dt * hn.a1 * F;
            cul[hd.i0] += nd.dt * hd.a0 * vth * F;
            if (hd.i1 >= 0) cul[hd.i1] += nd.dt * hd.a1 * vth * F;
            double x = phin[q] + H[q];
            iv += nd.dt * (-mu.mu_e * x * x - nd.r * mu.mu_p * vth * psin[q] * psin[q]);
            double kk = mu.mu_e * (x - vth * psin[q]);
            k1 += nd.dt * kk;
            k1a += nd.dt * std::abs(kk);
          }
        A.ch += W * chl;
        A.cu += W * cul;
        A.cha += W * chl.cwiseAbs();
        A.cua += W * cul.cwiseAbs();
        A.IV += W * iv;
        A.K1[si] += L.sigma * W * k1;
        A.Ke[si] += L.sigma * W * o.e * k1;
        A.K1s[si] += W * k1a;
        A.Kes[si] += W * std::abs(o.e) * k1a;
        for (size_t k = 0; k < pieces.size(); ++k) {
          const Piece& pc = pieces[k];
          if (pc.outbound && pc.tag_end >= 0 && pc.tag_end < nf) {
            A.fl[pc.tag_end] += W * mu.mu_e * He[k];
            A.fla[pc.tag_end] += std::abs(W * mu.mu_e * He[k]);
          }
          if (!pc.outbound && pc.tag_start >= 0 && pc.tag_start < nf) {
            A.fl[pc.tag_start] -= W * mu.mu_e * Hs[k];
            A.fla[pc.tag_start] += std::abs(W * mu.mu_e * Hs[k]);
          }
        }
      }
    }
  });
  ModeFunctionals out;
  out.charge = Eigen::VectorXd::Zero(n);
  out.current = Eigen::VectorXd::Zero(n);
  out.charge_abs = Eigen::VectorXd::Zero(n);
  out.current_abs = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd fl = Eigen::VectorXd::Zero(nf), fla = Eigen::VectorXd::Zero(nf);
  for (auto& A : acc) {
    if (A.ch.size() == 0) continue;
    out.charge += A.ch;
    out.current += A.cu;
    out.charge_abs += A.cha;
    out.current_abs += A.cua;
    out.IV += A.IV;
    for (int s = 0; s < 2; ++s) {
      out.K1[s] += A.K1[s];
      out.Ke[s] += A.Ke[s];
      out.K1_scale[s] += A.K1s[s];
      out.Ke_scale[s] += A.Kes[s];
    }
    fl += A.fl;
    fla += A.fla;
  }
  out.faces = B.faces();
  out.flux.resize(nf);
  out.flux_scale.resize(nf);
  for (int f = 0; f < nf; ++f) {
    double c = 2 * kPi * out.faces[f];
    out.flux[f] = fl[f] / c;
    out.flux_scale[f] = fla[f] / c;
  }
  return out;
}

}  // namespace vmstab
