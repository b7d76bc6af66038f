#pragma once
#include <cmath>

// Independent reference values, no library code involved.
namespace oracle {

// J1 by its power series, fine for x < 10
inline double bessel_j1(double x) {
  double term = x / 2, sum = term;
  for (int m = 1; m < 60; ++m) {
    term *= -(x * x / 4) / (m * (m + 1.0));
    sum += term;
  }
  return sum;
}

// first positive zero of J1, bisection on [3, 4.5]
inline double j11() {
  double lo = 3.0, hi = 4.5;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if ((bessel_j1(lo) > 0) == (bessel_j1(mid) > 0)) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// int_{R^2} exp(-<v>) dv = 2 pi int_1^inf u e^{-u} du = 4 pi / e
inline double maxwellian_mass() { return 4 * M_PI / std::exp(1.0); }

// time average of h(r) along a straight chord of impact parameter b in the unit disk,
// r = sqrt(b^2 + t^2), midpoint rule in t
template <class H>
double chord_average(H h, double b, int N = 4000) {
  double T = std::sqrt(1 - b * b), s = 0;
  for (int k = 0; k < N; ++k) {
    double t = T * (k + 0.5) / N;
    s += h(std::sqrt(b * b + t * t));
  }
  return s / N;
}

}  // namespace oracle
