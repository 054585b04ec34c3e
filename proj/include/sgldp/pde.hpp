#pragma once

#include <cstddef>
#include <vector>

#include "sgldp/exec.hpp"
#include "sgldp/gamma_path.hpp"
#include "sgldp/mixture.hpp"

namespace sgldp {

enum class TerminalKind { zero_temp, finite_temp };

// Grid for the backward cascade solve. x-grid is uniform on [-x_max, x_max]
// with n_x odd so 0 is a grid point. t_eval lists the times whose slices the
// caller wants stored (knot times and 1 - eps_sing are always stored).
struct PdeGrid {
  double x_max = 0.0;  // 0 = auto: |h| + 6 sqrt(xibar'(1)) + drift budget
  int n_x = 2001;
  int quad_order = 40;
  std::vector<double> t_eval{0.0};
  double eps_sing = 1e-4;
};

// Auto x_max rule exposed for callers that size their own grids.
double default_x_max(const MixtureSpec& m, const FieldSpec& f,
                     const GammaPath& gamma);

struct PdeSlice {
  double t = 0.0;
  double asym_c = 0.0;  // psi(t,x) ~= |x| + asym_c for |x| > x_max
  std::vector<double> psi, psi_x, psi_xx;
};

class PdeSolution {
 public:
  struct Eval {
    double psi, psi_x, psi_xx;
  };

  TerminalKind terminal_kind = TerminalKind::zero_temp;
  double beta = 0.0;  // finite_temp only
  double x_max = 0.0;
  int n_x = 0;
  double dx = 0.0;
  std::vector<PdeSlice> slices;  // ascending t, last at 1 - eps_sing

  // Snaps t to a stored slice within 1e-9; t = 1 is served from the terminal
  // datum in closed form (psi_xx there is reported as 0 away from the kink).
  Eval evaluate(double t, double x) const;
  Eval evaluate_at(std::size_t slice_idx, double x) const;
  std::size_t slice_index(double t) const;

  double terminal_psi(double x) const;
  double terminal_psi_x(double x) const;
};

// Backward solve with terminal |x| (zero temperature). The recursion is the
// Gaussian cascade: on an interval where gamma == m, one quadrature step
// psi(t,x) = (1/m) log E_Z exp(m psi(t_right, x + v Z)), v^2 = xi'(t_right) - xi'(t),
// with the plain average when m == 0. The step from t = 1 itself uses the
// closed-form Gaussian integral of the terminal datum.
PdeSolution solve_zero_temp(const MixtureSpec& m, const GammaPath& gamma,
                            const PdeGrid& grid,
                            exec::Policy policy = exec::Policy::parallel);

// Same recursion with terminal (1/beta) log cosh(beta x).
PdeSolution solve_finite_temp(const MixtureSpec& m, const GammaPath& gamma,
                              double beta, const PdeGrid& grid,
                              exec::Policy policy = exec::Policy::parallel);

}  // namespace sgldp
