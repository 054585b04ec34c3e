#include "sgldp/mixture.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace sgldp {

namespace {

// Horner on the sparse monomial list: evaluates sum c_p r^p exactly.
double sparse_poly(const std::vector<std::pair<int, double>>& coeffs, double r,
                   int deriv) {
  double acc = 0.0;
  for (const auto& [p, c] : coeffs) {
    double factor = c;
    int q = p;
    for (int d = 0; d < deriv; ++d) factor *= q--;
    if (q < 0) continue;
    acc += factor * std::pow(r, q);
  }
  return acc;
}

}  // namespace

double xi(const MixtureSpec& m, double r) { return sparse_poly(m.coeffs, r, 0); }
double xi_prime(const MixtureSpec& m, double r) { return sparse_poly(m.coeffs, r, 1); }
double xi_second(const MixtureSpec& m, double r) { return sparse_poly(m.coeffs, r, 2); }

double theta(const MixtureSpec& m, double r) {
  return r * xi_prime(m, r) - xi(m, r);
}

double xi_bar(const MixtureSpec& m, double gaussian_var, double r) {
  return xi(m, r) + gaussian_var * r;
}

std::vector<std::string> validate(const MixtureSpec& m) {
  std::vector<std::string> errors;
  if (m.coeffs.empty()) errors.push_back("empty mixture");
  std::set<int> seen;
  bool any_positive = false;
  for (const auto& [p, c] : m.coeffs) {
    if (p < 2) errors.push_back("power p=" + std::to_string(p) + " below 2");
    if (!seen.insert(p).second)
      errors.push_back("duplicate power p=" + std::to_string(p));
    if (c < 0.0) errors.push_back("negative coefficient at p=" + std::to_string(p));
    if (c > 0.0) any_positive = true;
    if (!std::isfinite(c)) errors.push_back("non-finite coefficient");
  }
  if (!m.coeffs.empty() && !any_positive)
    errors.push_back("all coefficients zero");
  return errors;
}

std::vector<std::string> validate(const FieldSpec& f) {
  std::vector<std::string> errors;
  if (f.gaussian_var < 0.0) errors.push_back("negative gaussian_var");
  if (f.atoms.empty()) errors.push_back("empty atom list");
  double total = 0.0;
  for (const auto& a : f.atoms) {
    if (a.prob < 0.0) errors.push_back("negative atom probability");
    if (!std::isfinite(a.value)) errors.push_back("non-finite atom value");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-12)
    errors.push_back("atom probabilities sum to " + std::to_string(total));
  if (f.is_deterministic() && !f.atoms.empty() &&
      std::abs(f.atoms[0].value - f.h) > 1e-12)
    errors.push_back("deterministic field: h does not match the single atom");
  return errors;
}

namespace {
void throw_if(const std::vector<std::string>& errors, const char* what) {
  if (errors.empty()) return;
  std::string msg = std::string(what) + ":";
  for (const auto& e : errors) msg += " " + e + ";";
  throw std::invalid_argument(msg);
}
}  // namespace

void validate_or_throw(const MixtureSpec& m) { throw_if(validate(m), "invalid mixture"); }
void validate_or_throw(const FieldSpec& f) { throw_if(validate(f), "invalid field"); }

}  // namespace sgldp
