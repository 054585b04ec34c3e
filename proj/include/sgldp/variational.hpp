#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "sgldp/gamma_path.hpp"
#include "sgldp/martingale.hpp"
#include "sgldp/mixture.hpp"
#include "sgldp/pde.hpp"

namespace sgldp {

enum class ObjectiveMode { zero_temp, finite_temp };

struct ObjectiveSpec {
  MixtureSpec mixture;
  FieldSpec field;
  double s = 0.0;
  ObjectiveMode mode = ObjectiveMode::zero_temp;
  double beta = 0.0;         // finite_temp only; requires beta >= s
  PdeGrid grid;              // x_max = 0 sizes the box per gamma
};

struct OptimizerParams {
  int max_knots = 16;
  int budget = 2000;          // objective evaluations
  std::uint64_t seed = 1;
  double tol = 1e-4;          // first-order margin tolerance, value units
  SdeConfig margin_sde;       // simulation backing the optimality test
  bool compute_margin = true;
};

struct OptimizationReport {
  GammaPath best_gamma;
  double value = 0.0;
  int iterations = 0;         // objective evaluations spent
  double first_order_margin = 0.0;
  double margin_stderr = 0.0;  // conservative bound from the g(t) error bars
  int knot_count = 0;
  bool converged = false;
  std::optional<MartingaleStats> stats;  // from the margin simulation
};

// Parisi-type functional: outer field average of the PDE value at t=0 minus
// the correction (1/2) int t xi''(t) gamma(t) dt. At s=0 the outer average is
// a plain expectation; for s>0 it is (1/s) log E exp(s psi(0, field)).
double objective(const ObjectiveSpec& spec, const GammaPath& gamma);

// Derivative-free minimization over step paths with floor s: coordinate
// golden-section over nondecreasing value increments and interior knot
// locations, plus progressive knot insertion with restart sweeps. The value
// cap bounds gamma at each location (tail-estimate search box).
struct SearchResult {
  GammaPath gamma;
  double value = 0.0;
  int evals = 0;
  bool budget_exhausted = false;
};
SearchResult gamma_search(const std::function<double(const GammaPath&)>& f,
                          double s_floor,
                          const std::function<double(double)>& value_cap,
                          int max_knots, int budget, std::uint64_t seed,
                          const std::optional<GammaPath>& warm_start = {});

OptimizationReport minimize_gamma(const ObjectiveSpec& spec,
                                  const OptimizerParams& params = {},
                                  const std::optional<GammaPath>& warm_start = {});

double ground_state(const MixtureSpec& m, const FieldSpec& f,
                    const PdeGrid& grid = {}, const OptimizerParams& params = {});

// Limit of (1/sN) log E[Z_N(beta)^{s/beta}]: the finite-temperature objective
// minimized over M_s^beta (floor s, cap beta).
double fractional_moment_limit(const MixtureSpec& m, const FieldSpec& f,
                               double s, double beta, const PdeGrid& grid = {},
                               const OptimizerParams& params = {});

// Full-report variants used by the pipeline.
OptimizationReport ground_state_report(const MixtureSpec& m, const FieldSpec& f,
                                       const PdeGrid& grid = {},
                                       const OptimizerParams& params = {});
OptimizationReport fractional_moment_report(const MixtureSpec& m,
                                            const FieldSpec& f, double s,
                                            double beta, const PdeGrid& grid = {},
                                            const OptimizerParams& params = {});

}  // namespace sgldp
