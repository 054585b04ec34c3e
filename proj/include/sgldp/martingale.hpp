#pragma once

#include <cstdint>
#include <vector>

#include "sgldp/exec.hpp"
#include "sgldp/gamma_path.hpp"
#include "sgldp/mixture.hpp"
#include "sgldp/pde.hpp"

namespace sgldp {

struct SdeConfig {
  int n_paths = 10000;  // even: antithetic +/-W pairs
  int n_steps = 1000;
  double t_cut = 1.0 - 1e-4;  // simulation horizon, matches the PDE eps_sing
  std::uint64_t seed = 1;
};

// Euler time grid: uniform on [0, t_cut] plus the knots of gamma, so the
// drift coefficient is constant on every step.
std::vector<double> sde_time_grid(const GammaPath& gamma, const SdeConfig& cfg);

struct MartingaleStats {
  double alpha0 = 0.0;  // d_x psi(0, h), deterministic
  double chi = 0.0;     // E[h alpha_0 + alpha_1 int sqrt(xi'') dW]
  double chi_stderr = 0.0;
  std::vector<double> t_grid;
  std::vector<double> g_of_t, g_of_t_stderr;  // E[alpha_t^2]
  double balance_integral = 0.0;  // int_0^1 xi''(t)(E[alpha_t^2] - t) dt
  double balance_stderr = 0.0;
  std::vector<double> r_grid;  // margins(r) = int_r^1 xi''(t)(E[alpha_t^2] - t) dt
  std::vector<double> constraint_margin, constraint_margin_stderr;
  long escaped_paths = 0;
  long n_paths = 0;
};

// Simulates the optimal-control SDE
//   X_0 = h,  dX = xi''(t) gamma(t) d_x psi(t, X) dt + sqrt(xi''(t)) dW
// and extracts the optimal martingale alpha_t = d_x psi(t, X_t), with
// alpha_1 read off the terminal datum at t_cut. `sol` must be solved for the
// same gamma with t_eval = sde_time_grid(gamma, cfg). Deterministic field
// only; random fields are handled by the caller as an outer quadrature loop.
MartingaleStats simulate_optimal(const MixtureSpec& m, double h,
                                 const GammaPath& gamma, const PdeSolution& sol,
                                 const SdeConfig& cfg,
                                 exec::Policy policy = exec::Policy::parallel);

// g(s, alpha)/s on simulated statistics: chi + (s/2) * balance_integral.
double uninverted_value(const MartingaleStats& stats, double s);

struct FeasibilityReport {
  double min_margin = 0.0;
  double min_margin_stderr = 0.0;
  double at_r = 0.0;
  bool feasible = false;  // min margin >= -3 stderr
};
FeasibilityReport check_feasibility(const MartingaleStats& stats);

struct BalanceResult {
  double value = 0.0;
  double stderr_ = 0.0;
};
BalanceResult balance(const MartingaleStats& stats);

}  // namespace sgldp
