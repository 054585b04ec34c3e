#include "sgldp/martingale.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgldp/rng.hpp"

namespace sgldp {

namespace {

constexpr int kPairsPerChunk = 256;  // fixed: reductions merge in chunk order

struct ChunkAcc {
  std::vector<double> sum_g, sumsq_g;
  std::vector<double> sum_margin, sumsq_margin;
  double sum_chi = 0.0, sumsq_chi = 0.0;
  double sum_bal = 0.0, sumsq_bal = 0.0;
  long escapes = 0;
};

struct MeanErr {
  double mean, se;
};

MeanErr finalize(double sum, double sumsq, long n) {
  const double mean = sum / n;
  double var = sumsq / n - mean * mean;
  if (var < 0.0) var = 0.0;
  const double se = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return {mean, se};
}

}  // namespace

std::vector<double> sde_time_grid(const GammaPath& gamma, const SdeConfig& cfg) {
  if (cfg.n_steps < 2) throw std::invalid_argument("sde: n_steps too small");
  if (!(cfg.t_cut > 0.0 && cfg.t_cut < 1.0))
    throw std::invalid_argument("sde: t_cut outside (0,1)");
  std::vector<double> t;
  t.reserve(cfg.n_steps + gamma.knots.size() + 1);
  for (int i = 0; i <= cfg.n_steps; ++i)
    t.push_back(cfg.t_cut * i / cfg.n_steps);
  for (const auto& k : gamma.knots)
    if (k.q > 0.0 && k.q < cfg.t_cut) t.push_back(k.q);
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double v : t)
    if (out.empty() || v - out.back() > 1e-12) out.push_back(v);
  return out;
}

MartingaleStats simulate_optimal(const MixtureSpec& m, double h,
                                 const GammaPath& gamma, const PdeSolution& sol,
                                 const SdeConfig& cfg, exec::Policy policy) {
  if (cfg.n_paths < 2 || cfg.n_paths % 2 != 0)
    throw std::invalid_argument("sde: n_paths must be even and >= 2");

  const std::vector<double> tg = sde_time_grid(gamma, cfg);
  const int M = static_cast<int>(tg.size()) - 1;  // steps
  std::vector<std::size_t> sidx(M + 1);
  for (int i = 0; i <= M; ++i) sidx[i] = sol.slice_index(tg[i]);

  // Per-step coefficients: drift uses the left endpoint, the noise variance
  // is exact, xi'(t_{i+1}) - xi'(t_i).
  std::vector<double> drift(M), noise(M), dt(M);
  for (int i = 0; i < M; ++i) {
    dt[i] = tg[i + 1] - tg[i];
    drift[i] = xi_second(m, tg[i]) * gamma.value(tg[i]) * dt[i];
    noise[i] = std::sqrt(std::max(xi_prime(m, tg[i + 1]) - xi_prime(m, tg[i]), 0.0));
  }
  std::vector<double> xipp(M + 1);
  for (int i = 0; i <= M; ++i) xipp[i] = xi_second(m, tg[i]);

  // Margin grid r in {0, 0.01, .., 0.99} mapped to nearest time-grid index.
  const int R = 100;
  std::vector<double> r_grid(R);
  std::vector<int> r_idx(R);
  for (int k = 0; k < R; ++k) {
    r_grid[k] = 0.01 * k;
    const auto it = std::lower_bound(tg.begin(), tg.end(), r_grid[k]);
    r_idx[k] = static_cast<int>(std::min<std::ptrdiff_t>(it - tg.begin(), M));
  }

  // Tail of every time integral over [t_cut, 1], where alpha has converged to
  // alpha_1: int_r^1 xi''(a1^2 - t) dt with constant a1^2.
  const double tail_xi = xi_prime(m, 1.0) - xi_prime(m, cfg.t_cut);
  const double tail_theta = theta(m, 1.0) - theta(m, cfg.t_cut);

  const double alpha0 = sol.evaluate_at(sidx[0], h).psi_x;
  const double x_clip = sol.x_max - 2.0 * sol.dx;
  const bool finite_temp = sol.terminal_kind == TerminalKind::finite_temp;
  const double beta = sol.beta;

  const long n_pairs = cfg.n_paths / 2;
  const long n_chunks = (n_pairs + kPairsPerChunk - 1) / kPairsPerChunk;
  std::vector<ChunkAcc> acc(n_chunks);

  const int nthreads = policy == exec::Policy::parallel ? exec::worker_count() : 1;
#pragma omp parallel num_threads(nthreads)
  {
    std::vector<double> a2A(M + 1), a2B(M + 1), suffixA(M + 2), suffixB(M + 2);
#pragma omp for schedule(dynamic)
    for (long c = 0; c < n_chunks; ++c) {
      ChunkAcc& A = acc[c];
      A.sum_g.assign(M + 1, 0.0);
      A.sumsq_g.assign(M + 1, 0.0);
      A.sum_margin.assign(R, 0.0);
      A.sumsq_margin.assign(R, 0.0);
      const long p_lo = c * kPairsPerChunk;
      const long p_hi = std::min(n_pairs, p_lo + kPairsPerChunk);
      for (long p = p_lo; p < p_hi; ++p) {
        rng::Stream stream(cfg.seed, static_cast<std::uint64_t>(p));
        double xA = h, xB = h, iA = 0.0, iB = 0.0;
        bool escA = false, escB = false;
        for (int i = 0; i < M; ++i) {
          const double aA = sol.evaluate_at(sidx[i], xA).psi_x;
          const double aB = sol.evaluate_at(sidx[i], xB).psi_x;
          a2A[i] = aA * aA;
          a2B[i] = aB * aB;
          const double z = stream.next_normal();
          const double w = noise[i] * z;
          xA += drift[i] * aA + w;
          xB += drift[i] * aB - w;
          iA += w;
          iB -= w;
          if (std::abs(xA) > x_clip) {
            xA = std::clamp(xA, -x_clip, x_clip);
            escA = true;
          }
          if (std::abs(xB) > x_clip) {
            xB = std::clamp(xB, -x_clip, x_clip);
            escB = true;
          }
        }
        const double aAe = sol.evaluate_at(sidx[M], xA).psi_x;
        const double aBe = sol.evaluate_at(sidx[M], xB).psi_x;
        a2A[M] = aAe * aAe;
        a2B[M] = aBe * aBe;
        const double a1A = finite_temp ? std::tanh(beta * xA)
                                       : (xA >= 0.0 ? 1.0 : -1.0);
        const double a1B = finite_temp ? std::tanh(beta * xB)
                                       : (xB >= 0.0 ? 1.0 : -1.0);

        // Suffix trapezoids of xi''(t)(alpha_t^2 - t) down from t_cut.
        suffixA[M] = a1A * a1A * tail_xi - tail_theta;
        suffixB[M] = a1B * a1B * tail_xi - tail_theta;
        for (int i = M - 1; i >= 0; --i) {
          const double fA1 = xipp[i + 1] * (a2A[i + 1] - tg[i + 1]);
          const double fA0 = xipp[i] * (a2A[i] - tg[i]);
          const double fB1 = xipp[i + 1] * (a2B[i + 1] - tg[i + 1]);
          const double fB0 = xipp[i] * (a2B[i] - tg[i]);
          suffixA[i] = suffixA[i + 1] + 0.5 * dt[i] * (fA0 + fA1);
          suffixB[i] = suffixB[i + 1] + 0.5 * dt[i] * (fB0 + fB1);
        }

        const double chi_p = 0.5 * ((h * alpha0 + a1A * iA) + (h * alpha0 + a1B * iB));
        const double bal_p = 0.5 * (suffixA[0] + suffixB[0]);
        A.sum_chi += chi_p;
        A.sumsq_chi += chi_p * chi_p;
        A.sum_bal += bal_p;
        A.sumsq_bal += bal_p * bal_p;
        for (int i = 0; i <= M; ++i) {
          const double g_p = 0.5 * (a2A[i] + a2B[i]);
          A.sum_g[i] += g_p;
          A.sumsq_g[i] += g_p * g_p;
        }
        for (int k = 0; k < R; ++k) {
          const double m_p = 0.5 * (suffixA[r_idx[k]] + suffixB[r_idx[k]]);
          A.sum_margin[k] += m_p;
          A.sumsq_margin[k] += m_p * m_p;
        }
        A.escapes += (escA ? 1 : 0) + (escB ? 1 : 0);
      }
    }
  }

  // Deterministic merge in chunk order.
  MartingaleStats st;
  st.alpha0 = alpha0;
  st.t_grid = tg;
  st.n_paths = cfg.n_paths;
  st.r_grid = r_grid;
  double s_chi = 0.0, ss_chi = 0.0, s_bal = 0.0, ss_bal = 0.0;
  std::vector<double> s_g(M + 1, 0.0), ss_g(M + 1, 0.0);
  std::vector<double> s_mar(R, 0.0), ss_mar(R, 0.0);
  for (const auto& A : acc) {
    s_chi += A.sum_chi;
    ss_chi += A.sumsq_chi;
    s_bal += A.sum_bal;
    ss_bal += A.sumsq_bal;
    for (int i = 0; i <= M; ++i) {
      s_g[i] += A.sum_g[i];
      ss_g[i] += A.sumsq_g[i];
    }
    for (int k = 0; k < R; ++k) {
      s_mar[k] += A.sum_margin[k];
      ss_mar[k] += A.sumsq_margin[k];
    }
    st.escaped_paths += A.escapes;
  }
  if (st.escaped_paths > 0.001 * cfg.n_paths)
    throw std::runtime_error("sde: more than 0.1% of paths escaped the box");

  const auto chi = finalize(s_chi, ss_chi, n_pairs);
  st.chi = chi.mean;
  st.chi_stderr = chi.se;
  const auto bal = finalize(s_bal, ss_bal, n_pairs);
  st.balance_integral = bal.mean;
  st.balance_stderr = bal.se;
  st.g_of_t.resize(M + 1);
  st.g_of_t_stderr.resize(M + 1);
  for (int i = 0; i <= M; ++i) {
    const auto g = finalize(s_g[i], ss_g[i], n_pairs);
    st.g_of_t[i] = g.mean;
    st.g_of_t_stderr[i] = g.se;
  }
  st.constraint_margin.resize(R);
  st.constraint_margin_stderr.resize(R);
  for (int k = 0; k < R; ++k) {
    const auto mg = finalize(s_mar[k], ss_mar[k], n_pairs);
    st.constraint_margin[k] = mg.mean;
    st.constraint_margin_stderr[k] = mg.se;
  }
  return st;
}

double uninverted_value(const MartingaleStats& stats, double s) {
  if (s < 0.0) throw std::invalid_argument("uninverted_value: s must be >= 0");
  return stats.chi + 0.5 * s * stats.balance_integral;
}

FeasibilityReport check_feasibility(const MartingaleStats& stats) {
  FeasibilityReport rep;
  if (stats.constraint_margin.empty())
    throw std::invalid_argument("check_feasibility: empty margins");
  std::size_t arg = 0;
  for (std::size_t k = 1; k < stats.constraint_margin.size(); ++k)
    if (stats.constraint_margin[k] < stats.constraint_margin[arg]) arg = k;
  rep.min_margin = stats.constraint_margin[arg];
  rep.min_margin_stderr = stats.constraint_margin_stderr[arg];
  rep.at_r = stats.r_grid[arg];
  rep.feasible = rep.min_margin >= -3.0 * rep.min_margin_stderr;
  return rep;
}

BalanceResult balance(const MartingaleStats& stats) {
  return {stats.balance_integral, stats.balance_stderr};
}

}  // namespace sgldp
