#pragma once

#include <cstdint>
#include <vector>

#include "sgldp/gamma_path.hpp"
#include "sgldp/martingale.hpp"
#include "sgldp/mixture.hpp"
#include "sgldp/variational.hpp"

namespace sgldp {

struct CurvePoint {
  double s = 0.0;
  double lambda = 0.0;        // Lambda(s) = s * value
  double lambda_prime = 0.0;  // envelope derivative chi + s * balance
  double value = 0.0;         // Lambda(s)/s (gs at s = 0)
  double chi = 0.0, chi_stderr = 0.0;
  double balance = 0.0, balance_stderr = 0.0;
  GammaPath gamma;
  int knot_count = 0;
  bool converged = false;
};

struct PipelineParams {
  PdeGrid grid;
  SdeConfig sde;
  OptimizerParams opt;
  double flat_tol = 1e-3;   // Lambda(s) - s*gs tolerance for the flat piece
  bool adaptive = true;     // insert grid points where Lambda' jumps
  double jump_tol = 0.1;
  int max_insert = 8;
};

class LaplaceCurve {
 public:
  double h = 0.0;
  double gs = 0.0;
  double s_underline = 0.0;
  std::vector<CurvePoint> points;  // ascending s, starts at 0

  double s_max() const { return points.back().s; }
  // Monotone piecewise-linear interpolant of the envelope derivative.
  double lambda_prime_at(double s) const;
  // Integral-consistent interpolant of Lambda anchored at the grid values.
  double lambda_at(double s) const;
  // Solves lambda'(s) = r by bisection; clamps to [0, s_max].
  double invert_lambda_prime(double r) const;
  // Node-consistency residual of the segment containing s (error proxy).
  double segment_mismatch(double s) const;

  void finalize();  // builds the cleaned derivative; called by lambda_curve

 private:
  std::vector<double> prime_clean_;
};

// One optimization + simulation per grid point; Lambda'(s) from the envelope
// formula at the optimizer, never from differencing Lambda.
LaplaceCurve lambda_curve(const MixtureSpec& m, double h,
                          std::vector<double> s_grid,
                          const PipelineParams& params);

enum class RateMethod { legendre, direct };

struct RateResult {
  double r = 0.0;
  double rate = 0.0;
  double s_star = 0.0;
  RateMethod method = RateMethod::legendre;
  double balance_term = 0.0;
  double rate_quotient = 0.0;  // (r - chi)^2 / (2 balance), direct only
  double rate_stderr = 0.0;
  bool bound_only = false;   // r beyond lambda'(s_max): lower bound reported
  bool degenerate = false;   // balance indistinguishable from zero
};

// Legendre route: maximize s r - Lambda(s) over the interpolated curve.
RateResult rate_legendre(const LaplaceCurve& curve, double r);

// Direct route: solve r = Lambda'(s), re-optimize at s*, and evaluate
// (s*^2/2) int xi''(t)(E[alpha_t^2] - t) dt, plus the quotient form.
RateResult rate_direct(const MixtureSpec& m, double h, double r,
                       const LaplaceCurve& curve, const PipelineParams& params);

struct QuadraticProbePoint {
  double delta = 0.0;
  double r = 0.0;
  double rate = 0.0;
  double ratio = 0.0;      // rate / delta^2
  double ratio_err = 0.0;
  double s_star = 0.0;
};

// Ratios Lambda*(gs + delta)/delta^2 along a list of deltas; pass a curve
// with enough resolution near the flat piece or let it build one.
std::vector<QuadraticProbePoint> quadratic_probe(const MixtureSpec& m, double h,
                                                 const std::vector<double>& deltas,
                                                 const PipelineParams& params,
                                                 const LaplaceCurve* curve = nullptr);

}  // namespace sgldp
