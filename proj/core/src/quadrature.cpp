#include "vmstab/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_roots.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "vmstab/common.hpp"

namespace vmstab {

const GaussRule& gauss_legendre(int n) {
  static std::mutex mtx;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  if (n < 1) throw Error("quadrature", "Gauss rule needs n >= 1");
  auto rule = std::make_unique<GaussRule>();
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(n);
  rule->x.resize(n);
  rule->w.resize(n);
  for (int i = 0; i < n; ++i) gsl_integration_glfixed_point(-1.0, 1.0, i, &rule->x[i], &rule->w[i], t);
  gsl_integration_glfixed_table_free(t);
  // gsl returns nodes in an implementation-defined order; sort ascending
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return rule->x[a] < rule->x[b]; });
  GaussRule sorted;
  for (int i : idx) {
    sorted.x.push_back(rule->x[i]);
    sorted.w.push_back(rule->w[i]);
  }
  // exact mirror symmetry of the node set
  for (int i = 0; i < n / 2; ++i) {
    double a = 0.5 * (sorted.x[n - 1 - i] - sorted.x[i]);
    double wa = 0.5 * (sorted.w[n - 1 - i] + sorted.w[i]);
    sorted.x[i] = -a;
    sorted.x[n - 1 - i] = a;
    sorted.w[i] = sorted.w[n - 1 - i] = wa;
  }
  if (n % 2 == 1) sorted.x[n / 2] = 0.0;
  *rule = std::move(sorted);
  auto& ref = *rule;
  cache.emplace(n, std::move(rule));
  return ref;
}

void gauss_on(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  const GaussRule& g = gauss_legendre(n);
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = c + h * g.x[i];
    w[i] = h * g.w[i];
  }
}

namespace {
struct Thunk {
  const std::function<double(double)>* f;
};
double call_thunk(double x, void* p) { return (*static_cast<Thunk*>(p)->f)(x); }
}  // namespace

double brent_root(const std::function<double(double)>& f, double a, double b, double xtol,
                  int max_iter) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw Error("quadrature", "brent_root: interval does not bracket a root");
  Thunk th{&f};
  gsl_function F;
  F.function = &call_thunk;
  F.params = &th;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_root_fsolver* s = gsl_root_fsolver_alloc(gsl_root_fsolver_brent);
  gsl_root_fsolver_set(s, &F, std::min(a, b), std::max(a, b));
  double root = 0.5 * (a + b);
  for (int it = 0; it < max_iter; ++it) {
    gsl_root_fsolver_iterate(s);
    root = gsl_root_fsolver_root(s);
    double lo = gsl_root_fsolver_x_lower(s), hi = gsl_root_fsolver_x_upper(s);
    if (hi - lo <= xtol) break;
  }
  gsl_root_fsolver_free(s);
  gsl_set_error_handler(old);
  return root;
}

}  // namespace vmstab
