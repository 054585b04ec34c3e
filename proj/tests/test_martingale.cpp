#include <cmath>
#include <vector>

#include "doctest.h"
#include "sgldp/martingale.hpp"
#include "sgldp/rng.hpp"

using namespace sgldp;

namespace {

const MixtureSpec kSk = MixtureSpec::sk();

PdeGrid sim_grid(const GammaPath& gamma, const SdeConfig& cfg, double x_max = 10.0) {
  PdeGrid g;
  g.x_max = x_max;
  g.n_x = 801;
  g.quad_order = 24;
  g.t_eval = sde_time_grid(gamma, cfg);
  return g;
}

MartingaleStats driftless_stats(int n_paths, int n_steps, std::uint64_t seed,
                                exec::Policy policy = exec::Policy::parallel) {
  const GammaPath zero = GammaPath::constant(0.0, 0.0);
  SdeConfig cfg;
  cfg.n_paths = n_paths;
  cfg.n_steps = n_steps;
  cfg.seed = seed;
  const PdeSolution sol = solve_zero_temp(kSk, zero, sim_grid(zero, cfg));
  return simulate_optimal(kSk, 0.0, zero, sol, cfg, policy);
}

// Synthetic stats for a constant martingale alpha == a with external field h.
MartingaleStats constant_alpha_stats(double a, double h) {
  MartingaleStats st;
  st.alpha0 = a;
  st.chi = h * a;
  const int M = 100;
  st.t_grid.resize(M + 1);
  st.g_of_t.assign(M + 1, a * a);
  st.g_of_t_stderr.assign(M + 1, 0.0);
  for (int i = 0; i <= M; ++i) st.t_grid[i] = static_cast<double>(i) / M;
  // xi = r^2: int_r^1 2 (a^2 - t) dt = 2 a^2 (1-r) - (1 - r^2)
  st.r_grid.resize(100);
  st.constraint_margin.resize(100);
  st.constraint_margin_stderr.assign(100, 0.0);
  for (int k = 0; k < 100; ++k) {
    const double r = 0.01 * k;
    st.r_grid[k] = r;
    st.constraint_margin[k] = 2.0 * a * a * (1.0 - r) - (1.0 - r * r);
  }
  st.balance_integral = st.constraint_margin[0];
  st.n_paths = 1;
  return st;
}

}  // namespace

TEST_CASE("driftless SK simulation reproduces chi = E|X_1|") {
  const MartingaleStats st = driftless_stats(20000, 500, 11);
  const double target = 1.1283791670955126;  // 2/sqrt(pi)
  CHECK(std::abs(st.chi - target) <= 3.0 * st.chi_stderr + 1e-4);
  CHECK(st.chi_stderr > 0.0);
  CHECK(st.escaped_paths == 0);
  CHECK(st.alpha0 == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("driftless g(t) matches the gaussian quadrature oracle") {
  const MartingaleStats st = driftless_stats(40000, 500, 12);
  // Oracle: E[erf(X/(2 sqrt(1-t)))^2] with X ~ N(0, 2t), dense trapezoid.
  auto oracle = [](double t) {
    const double sig = std::sqrt(2.0 * t);
    const int n = 200001;
    double acc = 0.0;
    const double zmax = 12.0, dz = 2.0 * zmax / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double z = -zmax + i * dz;
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double e = std::erf(sig * z / (2.0 * std::sqrt(1.0 - t)));
      acc += w * e * e * std::exp(-0.5 * z * z);
    }
    return acc * dz / std::sqrt(2.0 * 3.14159265358979323846);
  };
  CHECK(oracle(0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));  // frozen
  for (double t : {0.25, 0.5, 0.75}) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < st.t_grid.size(); ++i)
      if (std::abs(st.t_grid[i] - t) < std::abs(st.t_grid[idx] - t)) idx = i;
    CHECK(std::abs(st.g_of_t[idx] - oracle(t)) <=
          3.0 * st.g_of_t_stderr[idx] + 2e-3);
  }
}

TEST_CASE("alpha is a martingale: increments orthogonal to the past") {
  // Localized re-simulation so per-path values are visible to the test.
  const GammaPath gpath{0.0, {{0.0, 0.5}, {0.4, 1.2}}};
  SdeConfig cfg;
  cfg.n_paths = 20000;
  cfg.n_steps = 400;
  cfg.seed = 5;
  const PdeSolution sol = solve_zero_temp(kSk, gpath, sim_grid(gpath, cfg));
  const auto tg = sde_time_grid(gpath, cfg);
  std::size_t i_t = 0, i_tp = 0;
  for (std::size_t i = 0; i < tg.size(); ++i) {
    if (std::abs(tg[i] - 0.3) < std::abs(tg[i_t] - 0.3)) i_t = i;
    if (std::abs(tg[i] - 0.7) < std::abs(tg[i_tp] - 0.7)) i_tp = i;
  }
  const int n = cfg.n_paths;
  std::vector<double> inc(n), xt(n);
  for (int p = 0; p < n; ++p) {
    rng::Stream stream(cfg.seed, static_cast<std::uint64_t>(p));
    double x = 0.0, a_t = 0.0, x_t = 0.0;
    for (std::size_t i = 0; i + 1 < tg.size(); ++i) {
      if (i == i_t) {
        a_t = sol.evaluate_at(i, x).psi_x;
        x_t = x;
      }
      const double dt = tg[i + 1] - tg[i];
      const double drift = xi_second(kSk, tg[i]) * gpath.value(tg[i]) * dt;
      const double nse = std::sqrt(xi_prime(kSk, tg[i + 1]) - xi_prime(kSk, tg[i]));
      x += drift * sol.evaluate_at(i, x).psi_x + nse * stream.next_normal();
    }
    inc[p] = sol.evaluate_at(i_tp, x).psi_x - a_t;
    xt[p] = x_t;
  }
  for (int moment = 0; moment <= 2; ++moment) {
    double mean = 0.0, var = 0.0;
    std::vector<double> prod(n);
    for (int p = 0; p < n; ++p) {
      const double phi = moment == 0 ? 1.0 : (moment == 1 ? xt[p] : xt[p] * xt[p]);
      prod[p] = inc[p] * phi;
      mean += prod[p] / n;
    }
    for (int p = 0; p < n; ++p) var += (prod[p] - mean) * (prod[p] - mean) / (n - 1.0);
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean) <= 4.0 * se + 1e-4);
  }
}

TEST_CASE("uninverted value on synthetic constant-martingale stats") {
  const MartingaleStats st = constant_alpha_stats(1.0, 0.7);
  CHECK(uninverted_value(st, 0.0) == doctest::Approx(0.7));
  // alpha == 1, xi = r^2: value = h + s (1/2) int 2 (1-t) dt = h + s/2
  CHECK(uninverted_value(st, 1.0) == doctest::Approx(0.7 + 0.5));
  CHECK(uninverted_value(st, 0.4) == doctest::Approx(0.7 + 0.2));
}

TEST_CASE("feasibility margins for constant martingales") {
  const MartingaleStats one = constant_alpha_stats(1.0, 0.0);
  const auto rep1 = check_feasibility(one);
  CHECK(rep1.feasible);
  for (std::size_t k = 0; k < one.r_grid.size(); ++k)
    if (one.r_grid[k] < 1.0) CHECK(one.constraint_margin[k] > 0.0);

  const MartingaleStats zero = constant_alpha_stats(0.0, 0.0);
  const auto rep0 = check_feasibility(zero);
  CHECK(!rep0.feasible);
  CHECK(zero.constraint_margin[0] == doctest::Approx(-1.0));  // -int 2t dt
  CHECK(balance(zero).value == doctest::Approx(-1.0));
}

TEST_CASE("g(t) nondecreasing and bounded for a drifted simulation") {
  const GammaPath gpath{0.0, {{0.0, 0.3}, {0.5, 1.0}}};
  SdeConfig cfg;
  cfg.n_paths = 16000;
  cfg.n_steps = 400;
  cfg.seed = 21;
  const PdeSolution sol = solve_zero_temp(kSk, gpath, sim_grid(gpath, cfg));
  const MartingaleStats st = simulate_optimal(kSk, 0.5, gpath, sol, cfg);
  for (std::size_t i = 0; i < st.g_of_t.size(); ++i) {
    CHECK(st.g_of_t[i] >= 0.0);
    CHECK(st.g_of_t[i] <= 1.0 + 1e-12);
    if (i > 0)
      CHECK(st.g_of_t[i] - st.g_of_t[i - 1] >=
            -3.0 * (st.g_of_t_stderr[i] + st.g_of_t_stderr[i - 1]) - 1e-9);
  }
  CHECK(st.alpha0 == doctest::Approx(sol.evaluate(0.0, 0.5).psi_x));
}

TEST_CASE("step halving moves chi by less than the tolerance") {
  const MartingaleStats a = driftless_stats(20000, 250, 31);
  const MartingaleStats b = driftless_stats(20000, 500, 31);
  CHECK(std::abs(a.chi - b.chi) <=
        std::max(2.0 * (a.chi_stderr + b.chi_stderr), 1e-3));
}

TEST_CASE("serial and parallel simulations agree bitwise") {
  const MartingaleStats a = driftless_stats(4000, 100, 77, exec::Policy::serial);
  const MartingaleStats b = driftless_stats(4000, 100, 77, exec::Policy::parallel);
  CHECK(a.chi == b.chi);
  CHECK(a.balance_integral == b.balance_integral);
  REQUIRE(a.g_of_t.size() == b.g_of_t.size());
  for (std::size_t i = 0; i < a.g_of_t.size(); ++i)
    CHECK(a.g_of_t[i] == b.g_of_t[i]);
}
