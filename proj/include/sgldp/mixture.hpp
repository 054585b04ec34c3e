#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sgldp {

// Mixture function xi(r) = sum_p beta_p^2 r^p with p >= 2. Coefficients are
// stored as squares; only the squares ever enter the formulas.
struct MixtureSpec {
  std::vector<std::pair<int, double>> coeffs;  // (p, beta_p_sq)

  static MixtureSpec sk() { return MixtureSpec{{{2, 1.0}}}; }
};

// External field law: value = g + a where g ~ N(0, gaussian_var) and a is
// drawn from the bounded atoms. `h` records the deterministic value and must
// match the single atom when the law is deterministic.
struct FieldAtom {
  double value = 0.0;
  double prob = 1.0;
};

struct FieldSpec {
  double h = 0.0;
  double gaussian_var = 0.0;
  std::vector<FieldAtom> atoms{{0.0, 1.0}};

  static FieldSpec deterministic(double h) {
    return FieldSpec{h, 0.0, {{h, 1.0}}};
  }
  bool is_deterministic() const {
    return gaussian_var == 0.0 && atoms.size() == 1;
  }
};

double xi(const MixtureSpec& m, double r);
double xi_prime(const MixtureSpec& m, double r);
double xi_second(const MixtureSpec& m, double r);
// theta(r) = r xi'(r) - xi(r); also equals the integral of t xi''(t) on [0,r].
double theta(const MixtureSpec& m, double r);

// xibar adds the Gaussian field variance: covariance of the full Gaussian
// part of the Hamiltonian.
double xi_bar(const MixtureSpec& m, double gaussian_var, double r);

std::vector<std::string> validate(const MixtureSpec& m);
std::vector<std::string> validate(const FieldSpec& f);
void validate_or_throw(const MixtureSpec& m);
void validate_or_throw(const FieldSpec& f);

}  // namespace sgldp
