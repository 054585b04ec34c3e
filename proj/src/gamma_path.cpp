#include "sgldp/gamma_path.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sgldp {

double GammaPath::value(double t) const {
  double v = knots.front().m;
  for (const auto& k : knots) {
    if (k.q <= t) v = k.m;
    else break;
  }
  return v;
}

std::vector<std::string> validate(const GammaPath& g) {
  std::vector<std::string> errors;
  if (g.knots.empty()) {
    errors.push_back("no knots");
    return errors;
  }
  if (g.knots.front().q != 0.0) errors.push_back("first knot must sit at q=0");
  if (g.s_floor < 0.0) errors.push_back("negative s_floor");
  if (g.knots.front().m < g.s_floor - 1e-12)
    errors.push_back("gamma(0) below the floor s");
  double prev_q = -1.0, prev_m = -1e300;
  for (const auto& k : g.knots) {
    if (k.q < 0.0 || k.q >= 1.0) errors.push_back("knot location outside [0,1)");
    if (k.q <= prev_q) errors.push_back("knot locations not strictly increasing");
    if (k.m < prev_m - 1e-12) errors.push_back("values not nondecreasing");
    if (!std::isfinite(k.m)) errors.push_back("non-finite value");
    prev_q = k.q;
    prev_m = k.m;
  }
  return errors;
}

void validate_or_throw(const GammaPath& g) {
  auto errors = validate(g);
  if (errors.empty()) return;
  std::string msg = "invalid gamma path:";
  for (const auto& e : errors) msg += " " + e + ";";
  throw std::invalid_argument(msg);
}

double l1_distance(const GammaPath& a, const GammaPath& b) {
  std::set<double> cuts{0.0, 1.0};
  for (const auto& k : a.knots) cuts.insert(k.q);
  for (const auto& k : b.knots) cuts.insert(k.q);
  double dist = 0.0;
  double prev = 0.0;
  for (auto it = std::next(cuts.begin()); it != cuts.end(); ++it) {
    const double len = *it - prev;
    dist += len * std::abs(a.value(prev) - b.value(prev));
    prev = *it;
  }
  return dist;
}

GammaPath midpoint(const GammaPath& a, const GammaPath& b) {
  std::set<double> cuts{0.0};
  for (const auto& k : a.knots) cuts.insert(k.q);
  for (const auto& k : b.knots) cuts.insert(k.q);
  GammaPath out;
  out.s_floor = 0.5 * (a.s_floor + b.s_floor);
  out.knots.clear();
  for (double q : cuts)
    out.knots.push_back({q, 0.5 * (a.value(q) + b.value(q))});
  return out;
}

GammaPath project_to_steps(const std::function<double(double)>& gamma,
                           double s_floor, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  const int fine_per_cell = 16;
  GammaPath out;
  out.s_floor = s_floor;
  out.knots.clear();
  double prev_m = s_floor;
  for (int k = 0; k < max_steps; ++k) {
    const double a = static_cast<double>(k) / max_steps;
    const double b = static_cast<double>(k + 1) / max_steps;
    double avg = 0.0;
    for (int j = 0; j < fine_per_cell; ++j)
      avg += gamma(a + (b - a) * (j + 0.5) / fine_per_cell);
    avg /= fine_per_cell;
    const double m = std::max(avg, prev_m);  // keep monotone and floored
    out.knots.push_back({a, m});
    prev_m = m;
  }
  return out;
}

}  // namespace sgldp
