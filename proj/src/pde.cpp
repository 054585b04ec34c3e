#include "sgldp/pde.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "sgldp/gauss_hermite.hpp"

namespace sgldp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kMergeTol = 1e-12;
constexpr double kAsymTol = 2e-3;

// log Phi(z) stable on the whole line.
double log_norm_cdf(double z) {
  if (z > 6.0) return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  if (z > -8.0) return std::log(0.5 * std::erfc(-z / kSqrt2));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - 0.5 * std::log(2.0 * kPi) - std::log(-z) + std::log(series);
}

double logcosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

struct Geometry {
  double x_min = 0.0, dx = 0.0;
  int n_x = 0;
  double x(int j) const { return x_min + dx * j; }
};

// Closed-form single step from the |x| terminal on an interval with gamma == m:
// psi(t,x) = (1/m) log E exp(m |x + vZ|), derivatives likewise exact.
void terminal_step_zero_temp(const Geometry& g, double v, double m,
                             PdeSlice& slice) {
  const int n = g.n_x;
  for (int j = 0; j < n; ++j) {
    const double x = g.x(j);
    if (m <= 0.0) {
      const double u = x / v;
      const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi);
      slice.psi[j] = x * std::erf(u / kSqrt2) + 2.0 * v * pdf;
      slice.psi_x[j] = std::erf(u / kSqrt2);
      slice.psi_xx[j] = 2.0 * pdf / v;
    } else {
      const double la = m * x + log_norm_cdf(x / v + m * v);
      const double lb = -m * x + log_norm_cdf(-x / v + m * v);
      const double mx = std::max(la, lb);
      const double lse = mx + std::log(std::exp(la - mx) + std::exp(lb - mx));
      slice.psi[j] = 0.5 * m * v * v + lse / m;
      const double px = std::tanh(0.5 * (la - lb));
      slice.psi_x[j] = px;
      const double log2d = std::log(2.0 / (v * std::sqrt(2.0 * kPi))) -
                           0.5 * (x / v) * (x / v) - 0.5 * m * m * v * v;
      slice.psi_xx[j] = m * (1.0 - px * px) + std::exp(log2d - lse);
    }
  }
}

using TailShape = std::function<double(double)>;

// One quadrature step. Source is a tabulated slice (extended beyond the box by
// tail_shape + c, the terminal profile shifted to match the edge) or an
// analytic function when stepping off the terminal datum itself.
void cascade_step(const Geometry& g, const std::vector<double>* table,
                  double c_asym, const TailShape& tail_shape,
                  const std::function<double(double)>* analytic, double v,
                  double m, const GaussHermite& gh, std::vector<double>& out,
                  exec::Policy policy) {
  const int n = g.n_x;
  const int quad = static_cast<int>(gh.nodes.size());
  out.assign(n, 0.0);

  std::vector<double> off(quad), lw(quad), w(quad);
  double max_off = 0.0;
  for (int i = 0; i < quad; ++i) {
    off[i] = v * kSqrt2 * gh.nodes[i];
    w[i] = gh.weights[i] / std::sqrt(kPi);
    lw[i] = std::log(w[i]);
    max_off = std::max(max_off, std::abs(off[i]));
  }

  std::vector<double> ext;
  std::vector<int> base(quad);
  std::vector<std::array<double, 4>> cw(quad);
  int margin = 0;
  if (table) {
    margin = static_cast<int>(std::ceil(max_off / g.dx)) + 3;
    ext.resize(n + 2 * margin);
    for (int j = 0; j < n + 2 * margin; ++j) {
      const int idx = j - margin;
      if (idx >= 0 && idx < n) {
        ext[j] = (*table)[idx];
      } else {
        ext[j] = tail_shape(g.x(idx)) + c_asym;
      }
    }
    for (int i = 0; i < quad; ++i) {
      const double s = off[i] / g.dx;
      const double fl = std::floor(s);
      base[i] = static_cast<int>(fl);
      const double f = s - fl;
      // 4-point Lagrange weights at offsets -1, 0, 1, 2.
      cw[i][0] = -f * (f - 1.0) * (f - 2.0) / 6.0;
      cw[i][1] = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
      cw[i][2] = -(f + 1.0) * f * (f - 2.0) / 2.0;
      cw[i][3] = (f + 1.0) * f * (f - 1.0) / 6.0;
    }
  }

  const int nthreads = policy == exec::Policy::parallel ? exec::worker_count() : 1;
#pragma omp parallel num_threads(nthreads)
  {
    std::vector<double> tau(quad);
#pragma omp for schedule(static)
    for (int j = 0; j < n; ++j) {
      if (m > 0.0) {
        double mx = -1e300;
        for (int i = 0; i < quad; ++i) {
          double val;
          if (table) {
            const int k = j + margin + base[i] - 1;
            val = cw[i][0] * ext[k] + cw[i][1] * ext[k + 1] +
                  cw[i][2] * ext[k + 2] + cw[i][3] * ext[k + 3];
          } else {
            val = (*analytic)(g.x(j) + off[i]);
          }
          tau[i] = lw[i] + m * val;
          if (tau[i] > mx) mx = tau[i];
        }
        double acc = 0.0;
        for (int i = 0; i < quad; ++i) acc += std::exp(tau[i] - mx);
        out[j] = (mx + std::log(acc)) / m;
      } else {
        double acc = 0.0;
        for (int i = 0; i < quad; ++i) {
          double val;
          if (table) {
            const int k = j + margin + base[i] - 1;
            val = cw[i][0] * ext[k] + cw[i][1] * ext[k + 1] +
                  cw[i][2] * ext[k + 2] + cw[i][3] * ext[k + 3];
          } else {
            val = (*analytic)(g.x(j) + off[i]);
          }
          acc += w[i] * val;
        }
        out[j] = acc;
      }
    }
  }
}

void symmetrize(std::vector<double>& a) {
  const int n = static_cast<int>(a.size());
  for (int j = 0; j < n / 2; ++j) {
    const double avg = 0.5 * (a[j] + a[n - 1 - j]);
    a[j] = avg;
    a[n - 1 - j] = avg;
  }
}

void finite_differences(const Geometry& g, PdeSlice& s) {
  const int n = g.n_x;
  const double dx = g.dx;
  s.psi_x.assign(n, 0.0);
  s.psi_xx.assign(n, 0.0);
  for (int j = 1; j + 1 < n; ++j) {
    s.psi_x[j] = (s.psi[j + 1] - s.psi[j - 1]) / (2.0 * dx);
    s.psi_xx[j] = (s.psi[j + 1] - 2.0 * s.psi[j] + s.psi[j - 1]) / (dx * dx);
  }
  s.psi_x[0] = (-3.0 * s.psi[0] + 4.0 * s.psi[1] - s.psi[2]) / (2.0 * dx);
  s.psi_x[n - 1] = (3.0 * s.psi[n - 1] - 4.0 * s.psi[n - 2] + s.psi[n - 3]) / (2.0 * dx);
  s.psi_xx[0] = s.psi_xx[1];
  s.psi_xx[n - 1] = s.psi_xx[n - 2];
}

// The exponent of the integrand in a step with multiplier m peaks near
// z ~ m v / sqrt(2); substeps keep that inside the node range (the constant-m
// propagator composes exactly, so splitting is free of modeling error).
int substeps_for(double v2, double m, const GaussHermite& gh) {
  if (m <= 0.0 || v2 <= 0.0) return 1;
  const int quad = static_cast<int>(gh.nodes.size());
  double z_allow = std::min(gh.nodes.back() - 3.6, std::sqrt(0.6 * quad));
  z_allow = std::max(z_allow, 1.0);
  const double v_max = 2.0 * z_allow / (kSqrt2 * m);
  const int n = static_cast<int>(std::ceil(v2 / (v_max * v_max)));
  return std::clamp(n, 1, 20000);
}

}  // namespace

double default_x_max(const MixtureSpec& m, const FieldSpec& f,
                     const GammaPath& gamma) {
  double atom_max = 0.0;
  for (const auto& a : f.atoms) atom_max = std::max(atom_max, std::abs(a.value));
  atom_max = std::max(atom_max, std::abs(f.h));
  double drift = 0.0;
  for (std::size_t k = 0; k < gamma.knots.size(); ++k) {
    const double q_right = (k + 1 < gamma.knots.size()) ? gamma.knots[k + 1].q : 1.0;
    drift += gamma.knots[k].m * (xi_prime(m, q_right) - xi_prime(m, gamma.knots[k].q));
  }
  return atom_max + 12.0 * std::sqrt(f.gaussian_var) +
         6.0 * std::sqrt(xi_prime(m, 1.0) + f.gaussian_var) + drift;
}

namespace {

struct SolveSetup {
  Geometry geom;
  std::vector<double> store_times;
  double t_last = 0.0;
};

SolveSetup prepare(const MixtureSpec& m, const GammaPath& gamma,
                   const PdeGrid& grid) {
  validate_or_throw(m);
  validate_or_throw(gamma);
  if (grid.n_x < 9 || grid.n_x % 2 == 0)
    throw std::invalid_argument("pde: n_x must be odd and >= 9");
  if (grid.quad_order < 20)
    throw std::invalid_argument("pde: quad_order must be >= 20");
  if (!(grid.eps_sing > 0.0 && grid.eps_sing < 0.1))
    throw std::invalid_argument("pde: eps_sing out of range");

  SolveSetup s;
  s.t_last = 1.0 - grid.eps_sing;
  for (const auto& k : gamma.knots)
    if (k.q >= s.t_last - kMergeTol)
      throw std::invalid_argument("pde: knot inside the singular band near t=1");

  double x_max = grid.x_max;
  if (x_max <= 0.0) x_max = default_x_max(m, FieldSpec{}, gamma);
  s.geom.n_x = grid.n_x;
  s.geom.dx = 2.0 * x_max / (grid.n_x - 1);
  s.geom.x_min = -x_max;

  std::vector<double> times;
  times.push_back(0.0);
  times.push_back(s.t_last);
  for (const auto& k : gamma.knots) times.push_back(k.q);
  for (double t : grid.t_eval) {
    if (t < 0.0 || t > 1.0)
      throw std::invalid_argument("pde: t_eval outside [0,1]");
    times.push_back(std::min(t, s.t_last));
  }
  std::sort(times.begin(), times.end());
  for (double t : times)
    if (s.store_times.empty() || t - s.store_times.back() > kMergeTol)
      s.store_times.push_back(t);
  return s;
}

PdeSolution solve_impl(const MixtureSpec& m, const GammaPath& gamma,
                       const PdeGrid& grid, TerminalKind kind, double beta,
                       exec::Policy policy) {
  const SolveSetup setup = prepare(m, gamma, grid);
  const Geometry& g = setup.geom;
  const GaussHermite gh(grid.quad_order);

  PdeSolution sol;
  sol.terminal_kind = kind;
  sol.beta = beta;
  sol.x_max = -g.x_min;
  sol.n_x = g.n_x;
  sol.dx = g.dx;
  sol.slices.resize(setup.store_times.size());
  for (std::size_t i = 0; i < setup.store_times.size(); ++i) {
    sol.slices[i].t = setup.store_times[i];
    sol.slices[i].psi.assign(g.n_x, 0.0);
  }

  const TailShape tail_shape = [&](double x) {
    return kind == TerminalKind::zero_temp ? std::abs(x)
                                           : logcosh(beta * x) / beta;
  };
  const std::function<double(double)> terminal_fn = tail_shape;
  const double x_edge = g.x(g.n_x - 1);
  auto asym_c_of = [&](const std::vector<double>& psi) {
    return psi[g.n_x - 1] - tail_shape(x_edge);
  };

  // Stored-slice sanity: the edge must already follow the terminal-shape
  // asymptote, otherwise the box is too small for this mixture and gamma.
  const int probe = std::max(1, static_cast<int>(std::round(1.0 / g.dx)));
  auto check_asym = [&](const PdeSlice& s) {
    const double c_edge = s.psi[g.n_x - 1] - tail_shape(x_edge);
    const double c_in =
        s.psi[g.n_x - 1 - probe] - tail_shape(g.x(g.n_x - 1 - probe));
    if (std::abs(c_edge - c_in) > kAsymTol)
      throw std::runtime_error(
          "pde: x_max too small, boundary deviates from the asymptote");
  };

  // Steps from an anchor (or the terminal when anchor == nullptr) down to a
  // target variance v2 with constant multiplier mk, subdividing so the
  // quadrature keeps the tilted integrand inside its node range.
  std::vector<double> cur, nxt;
  auto step_to = [&](PdeSlice& out_slice, const PdeSlice* anchor, double v2,
                     double mk) {
    const int n_sub = substeps_for(v2, mk, gh);
    const double v_sub = std::sqrt(v2 / n_sub);
    const std::vector<double>* src = anchor ? &anchor->psi : nullptr;
    double c_src = anchor ? anchor->asym_c : 0.0;
    for (int j = 0; j < n_sub; ++j) {
      if (src) {
        cascade_step(g, src, c_src, tail_shape, nullptr, v_sub, mk, gh, nxt,
                     policy);
      } else {
        cascade_step(g, nullptr, 0.0, tail_shape, &terminal_fn, v_sub, mk, gh,
                     nxt, policy);
      }
      symmetrize(nxt);
      std::swap(cur, nxt);
      src = &cur;
      c_src = asym_c_of(cur);
    }
    out_slice.psi = cur;
    out_slice.asym_c = c_src;
  };

  const auto& knots = gamma.knots;
  const int K = static_cast<int>(knots.size());
  int slice_idx = static_cast<int>(sol.slices.size()) - 1;
  const PdeSlice* right_anchor = nullptr;
  for (int k = K - 1; k >= 0; --k) {
    const double q_right = (k == K - 1) ? 1.0 : knots[k + 1].q;
    const double mk = knots[k].m;
    const double xi_right = xi_prime(m, q_right);
    const PdeSlice* anchor = right_anchor;
    while (slice_idx >= 0 && sol.slices[slice_idx].t >= knots[k].q - kMergeTol) {
      PdeSlice& s = sol.slices[slice_idx];
      const double v2 = xi_right - xi_prime(m, s.t);
      if (v2 <= 0.0) throw std::logic_error("pde: vanishing step variance");
      if (k == K - 1 && kind == TerminalKind::zero_temp) {
        s.psi_x.assign(g.n_x, 0.0);
        s.psi_xx.assign(g.n_x, 0.0);
        terminal_step_zero_temp(g, std::sqrt(v2), mk, s);
        symmetrize(s.psi);
        s.asym_c = asym_c_of(s.psi);
      } else {
        step_to(s, anchor, v2, mk);
        finite_differences(g, s);
      }
      check_asym(s);
      --slice_idx;
    }
    right_anchor = &sol.slices[slice_idx + 1];
  }
  return sol;
}

}  // namespace

PdeSolution solve_zero_temp(const MixtureSpec& m, const GammaPath& gamma,
                            const PdeGrid& grid, exec::Policy policy) {
  return solve_impl(m, gamma, grid, TerminalKind::zero_temp, 0.0, policy);
}

PdeSolution solve_finite_temp(const MixtureSpec& m, const GammaPath& gamma,
                              double beta, const PdeGrid& grid,
                              exec::Policy policy) {
  if (!(beta > 0.0)) throw std::invalid_argument("pde: beta must be positive");
  if (beta < gamma.s_floor - 1e-12)
    throw std::invalid_argument("pde: beta below the gamma floor");
  if (gamma.top() > beta + 1e-12)
    throw std::invalid_argument("pde: gamma exceeds beta (not in M_s^beta)");
  return solve_impl(m, gamma, grid, TerminalKind::finite_temp, beta, policy);
}

double PdeSolution::terminal_psi(double x) const {
  return terminal_kind == TerminalKind::zero_temp ? std::abs(x)
                                                  : logcosh(beta * x) / beta;
}

double PdeSolution::terminal_psi_x(double x) const {
  if (terminal_kind == TerminalKind::finite_temp) return std::tanh(beta * x);
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

std::size_t PdeSolution::slice_index(double t) const {
  auto it = std::lower_bound(slices.begin(), slices.end(), t,
                             [](const PdeSlice& s, double v) { return s.t < v; });
  std::size_t best = slices.size();
  double dist = 1e300;
  if (it != slices.end() && std::abs(it->t - t) < dist) {
    best = static_cast<std::size_t>(it - slices.begin());
    dist = std::abs(it->t - t);
  }
  if (it != slices.begin()) {
    auto prev = std::prev(it);
    if (std::abs(prev->t - t) < dist) {
      best = static_cast<std::size_t>(prev - slices.begin());
      dist = std::abs(prev->t - t);
    }
  }
  if (best == slices.size() || dist > 1e-9)
    throw std::invalid_argument("pde: time not stored in the solution");
  return best;
}

PdeSolution::Eval PdeSolution::evaluate_at(std::size_t slice_idx, double x) const {
  const PdeSlice& s = slices[slice_idx];
  if (std::abs(x) > x_max + 1e-12)
    throw std::out_of_range("pde: x outside the solved box");
  const double u = (x + x_max) / dx;
  int k = static_cast<int>(std::floor(u));
  k = std::clamp(k, 1, n_x - 3);
  const double f = u - k;
  const double w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
  const double w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
  const double w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
  const double w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
  auto interp = [&](const std::vector<double>& a) {
    return w0 * a[k - 1] + w1 * a[k] + w2 * a[k + 1] + w3 * a[k + 2];
  };
  Eval e{interp(s.psi), interp(s.psi_x), interp(s.psi_xx)};
  e.psi_x = std::clamp(e.psi_x, -1.0, 1.0);
  return e;
}

PdeSolution::Eval PdeSolution::evaluate(double t, double x) const {
  if (std::abs(t - 1.0) <= 1e-9) {
    if (std::abs(x) > x_max + 1e-12)
      throw std::out_of_range("pde: x outside the solved box");
    return Eval{terminal_psi(x), terminal_psi_x(x), 0.0};
  }
  return evaluate_at(slice_index(t), x);
}

}  // namespace sgldp
