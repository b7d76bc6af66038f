#pragma once
#include <functional>
#include <vector>

namespace vmstab {

struct GaussRule {
  std::vector<double> x;  // nodes on (-1, 1), ascending
  std::vector<double> w;
};

// Gauss-Legendre rule with n points (cached per n).
const GaussRule& gauss_legendre(int n);

// Nodes/weights mapped to [a, b].
void gauss_on(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

// Brent root of f on [a, b]; f(a), f(b) must bracket. Absolute x tolerance.
double brent_root(const std::function<double(double)>& f, double a, double b, double xtol,
                  int max_iter = 200);

}  // namespace vmstab
