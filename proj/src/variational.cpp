#include "sgldp/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgldp/gauss_hermite.hpp"
#include "sgldp/rng.hpp"

namespace sgldp {

namespace {

constexpr double kQCap = 0.995;   // knots stay clear of the singular band
constexpr double kQGap = 1e-3;    // minimal spacing between knots
constexpr double kImprove = 1e-8; // keep an inserted knot only past this gain

struct FieldNode {
  double x = 0.0;
  double logw = 0.0;
};

std::vector<FieldNode> field_nodes(const FieldSpec& f, int gh_order) {
  std::vector<FieldNode> nodes;
  if (f.gaussian_var > 0.0) {
    const GaussHermite gh(gh_order);
    const double scale = std::sqrt(2.0 * f.gaussian_var);
    const double lognorm = -0.5 * std::log(3.14159265358979323846);
    for (const auto& a : f.atoms) {
      if (a.prob <= 0.0) continue;
      for (std::size_t i = 0; i < gh.nodes.size(); ++i)
        nodes.push_back({a.value + scale * gh.nodes[i],
                         std::log(a.prob) + std::log(gh.weights[i]) + lognorm});
    }
  } else {
    for (const auto& a : f.atoms)
      if (a.prob > 0.0) nodes.push_back({a.value, std::log(a.prob)});
  }
  return nodes;
}

// (1/s) log E exp(s psi(0, field)) with the plain expectation at s = 0.
double outer_field_value(const std::vector<FieldNode>& nodes, double s,
                         const PdeSolution& sol) {
  if (s == 0.0) {
    double acc = 0.0;
    for (const auto& n : nodes)
      acc += std::exp(n.logw) * sol.evaluate(0.0, n.x).psi;
    return acc;
  }
  double mx = -1e300;
  std::vector<double> tau(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    tau[i] = nodes[i].logw + s * sol.evaluate(0.0, nodes[i].x).psi;
    mx = std::max(mx, tau[i]);
  }
  double acc = 0.0;
  for (double t : tau) acc += std::exp(t - mx);
  return (mx + std::log(acc)) / s;
}

double correction_integral(const MixtureSpec& m, const GammaPath& gamma) {
  double acc = 0.0;
  for (std::size_t k = 0; k < gamma.knots.size(); ++k) {
    const double q_right =
        (k + 1 < gamma.knots.size()) ? gamma.knots[k + 1].q : 1.0;
    acc += gamma.knots[k].m * (theta(m, q_right) - theta(m, gamma.knots[k].q));
  }
  return 0.5 * acc;
}

void check_spec(const ObjectiveSpec& spec) {
  validate_or_throw(spec.mixture);
  validate_or_throw(spec.field);
  if (spec.s < 0.0) throw std::invalid_argument("objective: s must be >= 0");
  if (spec.mode == ObjectiveMode::finite_temp && spec.beta < spec.s)
    throw std::invalid_argument("objective: finite_temp requires beta >= s");
}

PdeSolution solve_for(const ObjectiveSpec& spec, const GammaPath& gamma,
                      const PdeGrid& grid) {
  PdeGrid g = grid;
  if (g.x_max <= 0.0) g.x_max = default_x_max(spec.mixture, spec.field, gamma);
  if (spec.mode == ObjectiveMode::finite_temp)
    return solve_finite_temp(spec.mixture, gamma, spec.beta, g);
  return solve_zero_temp(spec.mixture, gamma, g);
}

// ---------------------------------------------------------------------------
// Derivative-free search over (knot locations, value increments).

class Search {
 public:
  Search(const std::function<double(const GammaPath&)>& f, double floor,
         const std::function<double(double)>& cap, int budget)
      : f_(f), floor_(floor), cap_(cap), budget_(budget) {}

  GammaPath make(const std::vector<double>& q, const std::vector<double>& d) const {
    GammaPath g;
    g.s_floor = floor_;
    g.knots.clear();
    double m = floor_;
    for (std::size_t k = 0; k < q.size(); ++k) {
      m += d[k];
      g.knots.push_back({q[k], m});
    }
    return g;
  }

  double eval(const std::vector<double>& q, const std::vector<double>& d) {
    ++evals_;
    const GammaPath g = make(q, d);
    const double v = f_(g);
    if (v < best_val_) {
      best_val_ = v;
      best_gamma_ = g;
    }
    return v;
  }

  bool exhausted() const { return evals_ >= budget_; }
  int evals() const { return evals_; }
  double best_val() const { return best_val_; }
  const GammaPath& best_gamma() const { return best_gamma_; }
  double cap(double q) const { return cap_(q); }
  double floor() const { return floor_; }

 private:
  const std::function<double(const GammaPath&)>& f_;
  double floor_;
  const std::function<double(double)>& cap_;
  int budget_;
  int evals_ = 0;
  double best_val_ = std::numeric_limits<double>::infinity();
  GammaPath best_gamma_;
};

// Golden-section minimization of a unimodal section; returns the best abscissa.
template <typename F>
double golden(F&& g, double a, double b, int iters, double* out_val) {
  const double invphi = 0.6180339887498949;
  if (b - a < 1e-12) {
    if (out_val) *out_val = g(a);
    return a;
  }
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int i = 0; i < iters && (b - a) > 1e-10; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = g(x2);
    }
  }
  if (out_val) *out_val = std::min(f1, f2);
  return f1 <= f2 ? x1 : x2;
}

// Largest allowed raise of increment k: every knot at or after k moves up by
// the same amount, so the slack is governed by the tightest cap downstream.
double raise_slack(const Search& s, const std::vector<double>& q,
                   const std::vector<double>& d, std::size_t k) {
  double m = s.floor();
  for (std::size_t j = 0; j < k; ++j) m += d[j];
  double slack = std::numeric_limits<double>::infinity();
  double mj = m;
  for (std::size_t j = k; j < q.size(); ++j) {
    mj += d[j];
    slack = std::min(slack, s.cap(q[j]) - mj);
  }
  return std::max(slack, 0.0);
}

// Smallest q with cap(q) >= m (cap is nondecreasing in q).
double cap_floor_location(const Search& s, double m) {
  if (s.cap(0.0) >= m) return 0.0;
  double lo = 0.0, hi = kQCap;
  if (s.cap(hi) < m) return hi;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (s.cap(mid) >= m ? hi : lo) = mid;
  }
  return hi;
}

void sweep(Search& s, std::vector<double>& q, std::vector<double>& d,
           int rounds) {
  const std::size_t K = q.size();
  double radius_d = 1.0, radius_q = 0.15;
  for (int round = 0; round < rounds && !s.exhausted(); ++round) {
    const double before = s.best_val();
    for (std::size_t k = 0; k < K && !s.exhausted(); ++k) {
      const double slack = raise_slack(s, q, d, k);
      const double lo = std::max(0.0, d[k] - radius_d);
      const double hi = d[k] + std::min(radius_d, slack);
      if (hi - lo < 1e-12) continue;
      d[k] = golden(
          [&](double x) {
            std::vector<double> dd = d;
            dd[k] = x;
            return s.eval(q, dd);
          },
          lo, hi, 14, nullptr);
    }
    for (std::size_t k = 1; k < K && !s.exhausted(); ++k) {
      double m = s.floor();
      for (std::size_t j = 0; j <= k; ++j) m += d[j];
      const double lo = std::max({q[k - 1] + kQGap, q[k] - radius_q,
                                  cap_floor_location(s, m)});
      const double hi = std::min(
          (k + 1 < K ? q[k + 1] - kQGap : kQCap), q[k] + radius_q);
      if (hi - lo < 1e-9) continue;
      q[k] = golden(
          [&](double x) {
            std::vector<double> qq = q;
            qq[k] = x;
            return s.eval(qq, d);
          },
          lo, hi, 12, nullptr);
    }
    radius_d = std::max(0.02, radius_d / 3.0);
    radius_q = std::max(0.01, radius_q / 3.0);
    if (before - s.best_val() < 1e-9 && round >= 1) break;
  }
}

}  // namespace

double objective(const ObjectiveSpec& spec, const GammaPath& gamma) {
  check_spec(spec);
  validate_or_throw(gamma);
  if (std::abs(gamma.s_floor - spec.s) > 1e-9)
    throw std::invalid_argument("objective: gamma floor must equal spec.s");
  if (spec.mode == ObjectiveMode::finite_temp &&
      gamma.top() > spec.beta + 1e-9)
    throw std::invalid_argument("objective: gamma exceeds beta");

  PdeGrid g = spec.grid;
  g.t_eval = {0.0};
  const PdeSolution sol = solve_for(spec, gamma, g);
  const auto nodes = field_nodes(spec.field, 40);
  return outer_field_value(nodes, spec.s, sol) -
         correction_integral(spec.mixture, gamma);
}

SearchResult gamma_search(const std::function<double(const GammaPath&)>& f,
                          double s_floor,
                          const std::function<double(double)>& value_cap,
                          int max_knots, int budget, std::uint64_t seed,
                          const std::optional<GammaPath>& warm_start) {
  if (max_knots < 1) throw std::invalid_argument("gamma_search: max_knots >= 1");
  Search s(f, s_floor, value_cap, budget);
  rng::Stream jitter(seed, 0xa11ce);

  std::vector<double> q{0.0}, d{0.0};
  if (warm_start) {
    q.clear();
    d.clear();
    double prev_m = s_floor;
    for (const auto& k : warm_start->knots) {
      if (!q.empty() && k.q - q.back() < kQGap) continue;
      if (static_cast<int>(q.size()) >= max_knots) break;
      const double m = std::min(std::max(k.m, prev_m), value_cap(k.q));
      q.push_back(k.q);
      d.push_back(std::max(0.0, m - prev_m));
      prev_m = std::max(m, prev_m);
    }
    if (q.empty() || q[0] != 0.0) {
      q.insert(q.begin(), 0.0);
      d.insert(d.begin(), 0.0);
    }
  }

  // Stage 1: constant path, one increment.
  s.eval(q, d);
  d[0] = golden(
      [&](double x) {
        std::vector<double> dd = d;
        dd[0] = x;
        return s.eval(q, dd);
      },
      0.0, raise_slack(s, q, d, 0), 20, nullptr);
  sweep(s, q, d, 3);

  // Stage 2: progressive knot insertion with restart sweeps.
  while (static_cast<int>(q.size()) < max_knots && !s.exhausted()) {
    std::vector<double> candidates;
    for (std::size_t k = 0; k < q.size(); ++k) {
      const double right = (k + 1 < q.size()) ? q[k + 1] : kQCap;
      if (right - q[k] > 3.0 * kQGap) candidates.push_back(0.5 * (q[k] + right));
    }
    for (int j = 0; j < 2; ++j)
      candidates.push_back(0.02 + 0.95 * jitter.next_u01());

    double best_gain = 0.0, best_c = -1.0, best_dd = 0.0;
    const double base = s.best_val();
    for (double c : candidates) {
      if (s.exhausted()) break;
      bool clash = false;
      for (double qq : q) clash |= std::abs(qq - c) < 2.0 * kQGap;
      if (clash || c >= kQCap) continue;
      // tentative insert, optimize only the new increment
      std::vector<double> qq = q, dd = d;
      const auto pos = std::upper_bound(qq.begin(), qq.end(), c);
      const std::size_t idx = static_cast<std::size_t>(pos - qq.begin());
      qq.insert(pos, c);
      dd.insert(dd.begin() + idx, 0.0);
      const double slack = raise_slack(s, qq, dd, idx);
      if (slack < 1e-9) continue;
      // local bracket: the useful raise is on the scale of gamma(c), far
      // below the cap-driven slack near q -> 1
      double m_at = s.floor();
      for (std::size_t j = 0; j < idx; ++j) m_at += dd[j];
      const double hi = std::min(slack, 2.5 * (m_at + 1.0));
      double val = 0.0;
      const double dstar = golden(
          [&](double x) {
            std::vector<double> d2 = dd;
            d2[idx] = x;
            return s.eval(qq, d2);
          },
          0.0, hi, 12, &val);
      if (base - val > best_gain) {
        best_gain = base - val;
        best_c = c;
        best_dd = dstar;
      }
    }
    if (best_gain <= kImprove || best_c < 0.0) break;
    const auto pos = std::upper_bound(q.begin(), q.end(), best_c);
    const std::size_t idx = static_cast<std::size_t>(pos - q.begin());
    q.insert(pos, best_c);
    d.insert(d.begin() + idx, best_dd);
    sweep(s, q, d, 3);
  }
  sweep(s, q, d, 4);

  SearchResult out;
  out.gamma = s.best_gamma();
  out.value = s.best_val();
  out.evals = s.evals();
  out.budget_exhausted = s.exhausted();
  return out;
}

namespace {

// Feasible probe directions around gamma for the first-order optimality test.
std::vector<GammaPath> probe_paths(const GammaPath& gamma) {
  const double s = gamma.s_floor;
  std::vector<GammaPath> probes;
  probes.push_back(GammaPath::constant(s, s));
  for (double c : {0.25, 1.0}) {
    GammaPath up = gamma;
    for (auto& k : up.knots) k.m += c;
    probes.push_back(up);
    GammaPath down = gamma;
    for (auto& k : down.knots) k.m = std::max(s, k.m - c);
    probes.push_back(down);
  }
  for (double r : {0.25, 0.5, 0.75}) {
    GammaPath trunc;  // floor before r, gamma after
    trunc.s_floor = s;
    trunc.knots.clear();
    trunc.knots.push_back({0.0, s});
    for (const auto& k : gamma.knots)
      if (k.q >= r && k.m > s) trunc.knots.push_back({std::max(k.q, r), k.m});
    if (gamma.value(r) > s &&
        (trunc.knots.size() < 2 || trunc.knots[1].q > r))
      trunc.knots.push_back({r, gamma.value(r)});
    std::sort(trunc.knots.begin(), trunc.knots.end(),
              [](const GammaKnot& a, const GammaKnot& b) { return a.q < b.q; });
    if (validate(trunc).empty()) probes.push_back(trunc);

    GammaPath head = gamma;  // raise the head to gamma(r)
    const double mr = gamma.value(r);
    for (auto& k : head.knots)
      if (k.q < r) k.m = mr;
    if (validate(head).empty()) probes.push_back(head);
  }
  return probes;
}

struct MarginOutcome {
  double margin = 0.0;
  double stderr_bound = 0.0;
};

MarginOutcome margin_from_g(const MixtureSpec& m, const GammaPath& gamma,
                            const std::vector<double>& tg,
                            const std::vector<double>& g,
                            const std::vector<double>& g_se) {
  MarginOutcome out;
  out.margin = std::numeric_limits<double>::infinity();
  const auto probes = probe_paths(gamma);
  const std::size_t M = tg.size();
  for (const auto& probe : probes) {
    double dval = 0.0, derr = 0.0;
    double prev_f = 0.0, prev_e = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double u = 0.5 * xi_second(m, tg[i]) *
                       (probe.value(tg[i]) - gamma.value(tg[i]));
      const double f = u * (g[i] - tg[i]);
      const double e = std::abs(u) * g_se[i];
      if (i > 0) {
        const double dt = tg[i] - tg[i - 1];
        dval += 0.5 * dt * (prev_f + f);
        derr += 0.5 * dt * (prev_e + e);
      }
      prev_f = f;
      prev_e = e;
    }
    if (dval < out.margin) {
      out.margin = dval;
      out.stderr_bound = derr;
    }
  }
  return out;
}

}  // namespace

OptimizationReport minimize_gamma(const ObjectiveSpec& spec,
                                  const OptimizerParams& params,
                                  const std::optional<GammaPath>& warm_start) {
  check_spec(spec);
  const double xibar1 = xi_bar(spec.mixture, spec.field.gaussian_var, 1.0);
  const double box_c = 8.0 * (1.0 + spec.s) * (1.0 + xibar1);
  const double beta_cap = spec.mode == ObjectiveMode::finite_temp
                              ? spec.beta
                              : std::numeric_limits<double>::infinity();
  auto cap = [&](double qq) {
    const double denom =
        std::max(xibar1 - xi_bar(spec.mixture, spec.field.gaussian_var, qq), 1e-6);
    return std::min(box_c / denom, beta_cap);
  };

  ObjectiveSpec search_spec = spec;
  search_spec.grid.t_eval = {0.0};
  auto f = [&](const GammaPath& g) { return objective(search_spec, g); };

  const SearchResult res = gamma_search(f, spec.s, cap, params.max_knots,
                                        params.budget, params.seed, warm_start);

  OptimizationReport rep;
  rep.best_gamma = res.gamma;
  rep.value = res.value;
  rep.iterations = res.evals;
  rep.knot_count = static_cast<int>(res.gamma.knots.size());
  rep.first_order_margin = std::numeric_limits<double>::quiet_NaN();

  if (!params.compute_margin) {
    rep.converged = !res.budget_exhausted;
    return rep;
  }

  SdeConfig sde = params.margin_sde;
  PdeGrid grid = spec.grid;
  grid.t_eval = sde_time_grid(res.gamma, sde);
  const PdeSolution sol = solve_for(spec, res.gamma, grid);

  std::vector<double> g_mean, g_se;
  if (spec.field.is_deterministic()) {
    const MartingaleStats stats =
        simulate_optimal(spec.mixture, spec.field.h, res.gamma, sol, sde);
    g_mean = stats.g_of_t;
    g_se = stats.g_of_t_stderr;
    rep.stats = stats;
  } else {
    // Outer quadrature over the field: tilted weights exp(s psi(0, x_f)).
    const auto nodes = field_nodes(spec.field, 8);
    std::vector<double> w(nodes.size());
    double mx = -1e300;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      w[i] = nodes[i].logw + spec.s * sol.evaluate(0.0, nodes[i].x).psi;
      mx = std::max(mx, w[i]);
    }
    double tot = 0.0;
    for (auto& wi : w) {
      wi = std::exp(wi - mx);
      tot += wi;
    }
    for (auto& wi : w) wi /= tot;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      SdeConfig node_sde = sde;
      node_sde.seed = sde.seed + 1000 + i;
      const MartingaleStats stats =
          simulate_optimal(spec.mixture, nodes[i].x, res.gamma, sol, node_sde);
      if (g_mean.empty()) {
        g_mean.assign(stats.g_of_t.size(), 0.0);
        g_se.assign(stats.g_of_t.size(), 0.0);
      }
      for (std::size_t j = 0; j < g_mean.size(); ++j) {
        g_mean[j] += w[i] * stats.g_of_t[j];
        g_se[j] += w[i] * stats.g_of_t_stderr[j];
      }
    }
  }

  const auto mo =
      margin_from_g(spec.mixture, res.gamma, grid.t_eval, g_mean, g_se);
  rep.first_order_margin = mo.margin;
  rep.margin_stderr = mo.stderr_bound;
  rep.converged =
      rep.first_order_margin >= -std::max(params.tol, 3.0 * mo.stderr_bound);
  return rep;
}

OptimizationReport ground_state_report(const MixtureSpec& m, const FieldSpec& f,
                                       const PdeGrid& grid,
                                       const OptimizerParams& params) {
  ObjectiveSpec spec{m, f, 0.0, ObjectiveMode::zero_temp, 0.0, grid};
  return minimize_gamma(spec, params);
}

double ground_state(const MixtureSpec& m, const FieldSpec& f,
                    const PdeGrid& grid, const OptimizerParams& params) {
  return ground_state_report(m, f, grid, params).value;
}

OptimizationReport fractional_moment_report(const MixtureSpec& m,
                                            const FieldSpec& f, double s,
                                            double beta, const PdeGrid& grid,
                                            const OptimizerParams& params) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("fractional_moment: s must lie in (0,1)");
  if (beta < s)
    throw std::invalid_argument("fractional_moment: beta must be >= s");
  ObjectiveSpec spec{m, f, s, ObjectiveMode::finite_temp, beta, grid};
  return minimize_gamma(spec, params);
}

double fractional_moment_limit(const MixtureSpec& m, const FieldSpec& f,
                               double s, double beta, const PdeGrid& grid,
                               const OptimizerParams& params) {
  return fractional_moment_report(m, f, s, beta, grid, params).value;
}

}  // namespace sgldp
