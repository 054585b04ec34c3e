#pragma once

#include <vector>

namespace sgldp {

// Gauss-Hermite rule (physicists' convention): int e^{-x^2} f(x) dx ~= sum w_i f(x_i).
// For Z ~ N(0,1): E f(Z) ~= sum (w_i / sqrt(pi)) f(sqrt(2) x_i).
struct GaussHermite {
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;

  explicit GaussHermite(int order);
};

}  // namespace sgldp
