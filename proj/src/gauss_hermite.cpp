#include "sgldp/gauss_hermite.hpp"

#include <cmath>
#include <stdexcept>

namespace sgldp {

// Roots of H_n by Newton iteration on the orthonormal recurrence, largest
// root first with standard asymptotic initial guesses.
GaussHermite::GaussHermite(int order) {
  if (order < 1 || order > 400)
    throw std::invalid_argument("gauss-hermite order out of range");
  const int n = order;
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * nodes[n - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * nodes[n - 2];
    } else {
      z = 2.0 * z - nodes[n - i + 1];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[n - 1 - i] = z;
    nodes[i] = -z;
    weights[n - 1 - i] = 2.0 / (pp * pp);
    weights[i] = weights[n - 1 - i];
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

}  // namespace sgldp
