#include "sgldp/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgldp {

namespace {

std::size_t segment_of(const std::vector<CurvePoint>& pts, double s) {
  std::size_t i = 0;
  while (i + 2 < pts.size() && pts[i + 1].s <= s) ++i;
  return i;
}

CurvePoint solve_point(const MixtureSpec& m, double h, double s,
                       const PipelineParams& params,
                       const std::optional<GammaPath>& warm) {
  ObjectiveSpec spec{m, FieldSpec::deterministic(h), s,
                     ObjectiveMode::zero_temp, 0.0, params.grid};
  OptimizerParams opt = params.opt;
  opt.margin_sde = params.sde;
  const OptimizationReport rep = minimize_gamma(spec, opt, warm);
  CurvePoint pt;
  pt.s = s;
  pt.value = rep.value;
  pt.lambda = s * rep.value;
  pt.gamma = rep.best_gamma;
  pt.knot_count = rep.knot_count;
  pt.converged = rep.converged;
  if (rep.stats) {
    pt.chi = rep.stats->chi;
    pt.chi_stderr = rep.stats->chi_stderr;
    pt.balance = rep.stats->balance_integral;
    pt.balance_stderr = rep.stats->balance_stderr;
    pt.lambda_prime = pt.chi + s * pt.balance;
  }
  return pt;
}

}  // namespace

void LaplaceCurve::finalize() {
  prime_clean_.resize(points.size());
  double run = -1e300;
  for (std::size_t i = 0; i < points.size(); ++i) {
    run = std::max(run, points[i].lambda_prime);
    prime_clean_[i] = run;  // isotonic cleanup of Monte Carlo jitter
  }
}

double LaplaceCurve::lambda_prime_at(double s) const {
  const auto& p = points;
  if (s <= p.front().s) return prime_clean_.front();
  if (s >= p.back().s) return prime_clean_.back();
  const std::size_t i = segment_of(p, s);
  const double w = (s - p[i].s) / (p[i + 1].s - p[i].s);
  return (1.0 - w) * prime_clean_[i] + w * prime_clean_[i + 1];
}

double LaplaceCurve::lambda_at(double s) const {
  const auto& p = points;
  if (s <= 0.0) return 0.0;
  if (s >= p.back().s)
    return p.back().lambda + (s - p.back().s) * prime_clean_.back();
  const std::size_t i = segment_of(p, s);
  const double ds = p[i + 1].s - p[i].s;
  const double w = (s - p[i].s) / ds;
  // trapezoid of the piecewise-linear derivative, blended so the curve
  // passes through both node values
  auto integral_from_left = [&](double t) {
    const double lp0 = prime_clean_[i];
    const double lpt = lambda_prime_at(t);
    return p[i].lambda + 0.5 * (t - p[i].s) * (lp0 + lpt);
  };
  auto integral_from_right = [&](double t) {
    const double lp1 = prime_clean_[i + 1];
    const double lpt = lambda_prime_at(t);
    return p[i + 1].lambda - 0.5 * (p[i + 1].s - t) * (lp1 + lpt);
  };
  return (1.0 - w) * integral_from_left(s) + w * integral_from_right(s);
}

double LaplaceCurve::segment_mismatch(double s) const {
  const auto& p = points;
  if (p.size() < 2) return 0.0;
  const std::size_t i = segment_of(p, std::clamp(s, p.front().s, p.back().s));
  const double ds = p[i + 1].s - p[i].s;
  const double integral = 0.5 * ds * (prime_clean_[i] + prime_clean_[i + 1]);
  return std::abs(p[i + 1].lambda - p[i].lambda - integral);
}

double LaplaceCurve::invert_lambda_prime(double r) const {
  if (r <= lambda_prime_at(0.0)) return 0.0;
  if (r >= lambda_prime_at(s_max())) return s_max();
  double lo = 0.0, hi = s_max();
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lambda_prime_at(mid) < r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LaplaceCurve lambda_curve(const MixtureSpec& m, double h,
                          std::vector<double> s_grid,
                          const PipelineParams& params) {
  std::sort(s_grid.begin(), s_grid.end());
  if (s_grid.empty() || s_grid.front() != 0.0)
    throw std::invalid_argument("lambda_curve: s_grid must include 0");

  LaplaceCurve curve;
  curve.h = h;
  std::optional<GammaPath> warm;
  for (double s : s_grid) {
    if (!curve.points.empty() && s - curve.points.back().s < 1e-12) continue;
    CurvePoint pt = solve_point(m, h, s, params, warm);
    warm = pt.gamma;
    curve.points.push_back(std::move(pt));
  }
  curve.gs = curve.points.front().value;
  curve.points.front().lambda = 0.0;  // exact by definition

  if (params.adaptive) {
    int inserted = 0;
    for (std::size_t i = 0; i + 1 < curve.points.size() &&
                            inserted < params.max_insert;) {
      const double jump =
          curve.points[i + 1].lambda_prime - curve.points[i].lambda_prime;
      const double gap_s = curve.points[i + 1].s - curve.points[i].s;
      if (jump > params.jump_tol && gap_s > 0.02) {
        const double mid = 0.5 * (curve.points[i].s + curve.points[i + 1].s);
        CurvePoint pt = solve_point(m, h, mid, params, curve.points[i].gamma);
        curve.points.insert(curve.points.begin() + i + 1, std::move(pt));
        ++inserted;
      } else {
        ++i;
      }
    }
  }

  curve.finalize();

  // Flat piece: a grid point is flat when Lambda - s gs sits inside the
  // tolerance AND the balance integral is statistically zero (the two are
  // equivalent at the optimizer; the gap alone cannot resolve small s since
  // it scales like s^2 balance / 2).
  curve.s_underline = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& pt = curve.points[i];
    const bool gap_flat = pt.lambda - pt.s * curve.gs <= params.flat_tol;
    const bool balance_flat = pt.balance <= 3.0 * pt.balance_stderr;
    if (gap_flat && balance_flat)
      curve.s_underline = pt.s;
    else
      break;
  }
  return curve;
}

RateResult rate_legendre(const LaplaceCurve& curve, double r) {
  RateResult out;
  out.r = r;
  out.method = RateMethod::legendre;
  if (r <= curve.gs) {
    out.rate = 0.0;
    out.s_star = 0.0;
    return out;
  }
  if (r > curve.lambda_prime_at(curve.s_max())) {
    out.bound_only = true;
    out.s_star = curve.s_max();
    out.rate = std::max(0.0, curve.s_max() * r - curve.lambda_at(curve.s_max()));
    return out;
  }
  // golden-section maximization of the concave section s r - Lambda(s)
  const double invphi = 0.6180339887498949;
  double a = 0.0, b = curve.s_max();
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  auto phi = [&](double s) { return s * r - curve.lambda_at(s); };
  double f1 = phi(x1), f2 = phi(x2);
  for (int i = 0; i < 200 && (b - a) > 1e-10; ++i) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = phi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = phi(x2);
    }
  }
  out.s_star = f1 >= f2 ? x1 : x2;
  out.rate = std::max(0.0, std::max(f1, f2));
  // informative: interpolate the balance integral near s_star
  const auto& p = curve.points;
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (std::abs(p[i].s - out.s_star) < std::abs(p[nearest].s - out.s_star))
      nearest = i;
  out.balance_term = p[nearest].balance;
  out.rate_stderr = curve.segment_mismatch(out.s_star) + 1e-4;
  return out;
}

RateResult rate_direct(const MixtureSpec& m, double h, double r,
                       const LaplaceCurve& curve, const PipelineParams& params) {
  RateResult out;
  out.r = r;
  out.method = RateMethod::direct;
  if (r <= curve.gs) {
    out.rate = 0.0;
    return out;
  }
  double s_star = curve.invert_lambda_prime(r);
  if (r > curve.lambda_prime_at(curve.s_max())) {
    out.bound_only = true;
    s_star = curve.s_max();
  }
  out.s_star = s_star;

  // warm start from the nearest curve point
  const auto& p = curve.points;
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (std::abs(p[i].s - s_star) < std::abs(p[nearest].s - s_star)) nearest = i;
  const CurvePoint pt = solve_point(m, h, s_star, params, p[nearest].gamma);

  out.balance_term = pt.balance;
  out.degenerate = pt.balance <= 3.0 * pt.balance_stderr;
  out.rate = 0.5 * s_star * s_star * pt.balance;
  out.rate_stderr = 0.5 * s_star * s_star * pt.balance_stderr;
  if (pt.balance > 0.0) {
    out.rate_quotient =
        (r - pt.chi) * (r - pt.chi) / (2.0 * pt.balance);
    out.rate_stderr += std::abs(r - pt.chi) / pt.balance * pt.chi_stderr +
                       (out.rate_quotient / pt.balance) * pt.balance_stderr;
  }
  return out;
}

std::vector<QuadraticProbePoint> quadratic_probe(const MixtureSpec& m, double h,
                                                 const std::vector<double>& deltas,
                                                 const PipelineParams& params,
                                                 const LaplaceCurve* curve) {
  if (deltas.size() < 4)
    throw std::invalid_argument("quadratic_probe: need at least 4 deltas");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 0.3))
      throw std::invalid_argument("quadratic_probe: deltas must lie in (0, 0.3]");

  LaplaceCurve own;
  if (!curve) {
    std::vector<double> grid;
    for (double s = 0.0; s <= 1.5001; s += 0.1) grid.push_back(s);
    own = lambda_curve(m, h, grid, params);
    curve = &own;
  }
  std::vector<QuadraticProbePoint> out;
  for (double d : deltas) {
    QuadraticProbePoint pt;
    pt.delta = d;
    pt.r = curve->gs + d;
    const RateResult rr = rate_legendre(*curve, pt.r);
    pt.rate = rr.rate;
    pt.s_star = rr.s_star;
    pt.ratio = rr.rate / (d * d);
    pt.ratio_err = rr.rate_stderr / (d * d);
    out.push_back(pt);
  }
  return out;
}

}  // namespace sgldp
