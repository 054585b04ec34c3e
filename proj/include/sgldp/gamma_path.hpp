#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sgldp {

struct GammaKnot {
  double q = 0.0;  // knot location in [0, 1)
  double m = 0.0;  // value on [q_k, q_{k+1})
};

// Right-continuous nondecreasing step function on [0,1) with gamma(0) >= s_floor.
// knots[0].q == 0 always; values nondecreasing.
struct GammaPath {
  double s_floor = 0.0;
  std::vector<GammaKnot> knots{{0.0, 0.0}};

  static GammaPath constant(double s_floor, double m) {
    return GammaPath{s_floor, {{0.0, m}}};
  }

  double value(double t) const;       // gamma(t), t in [0,1)
  double top() const { return knots.back().m; }
};

std::vector<std::string> validate(const GammaPath& g);
void validate_or_throw(const GammaPath& g);

// L1([0,1)) distance between two step paths.
double l1_distance(const GammaPath& a, const GammaPath& b);

// Pointwise midpoint (a+b)/2 as a step path on the merged breakpoints.
GammaPath midpoint(const GammaPath& a, const GammaPath& b);

// L1 projection of an arbitrary nondecreasing function onto a step path with
// at most max_steps steps (cell averages on a uniform partition, monotonized).
GammaPath project_to_steps(const std::function<double(double)>& gamma,
                           double s_floor, int max_steps = 64);

}  // namespace sgldp
