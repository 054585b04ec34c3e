#include <cmath>
#include <vector>

#include "doctest.h"
#include "sgldp/pde.hpp"

using namespace sgldp;

namespace {

const MixtureSpec kSk = MixtureSpec::sk();

PdeGrid small_grid(double x_max = 10.0) {
  PdeGrid g;
  g.x_max = x_max;
  g.n_x = 801;
  g.quad_order = 24;
  g.t_eval = {0.0};
  return g;
}

// gamma == 0, xi = r^2: psi(0,x) = E|x + sqrt(2) Z| in closed form.
double heat_closed_form(double x) {
  return std::sqrt(4.0 / 3.14159265358979323846) * std::exp(-x * x / 4.0) +
         x * std::erf(x / 2.0);
}

// Dense trapezoid quadrature of E f(x + v Z), the independent oracle route.
template <typename F>
double trapezoid_gauss(F f, double x, double v, int n = 1000001, double zmax = 40.0) {
  double acc = 0.0;
  const double dz = 2.0 * zmax / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double z = -zmax + i * dz;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * f(x + v * z) * std::exp(-0.5 * z * z);
  }
  return acc * dz / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

TEST_CASE("heat solution matches the closed form") {
  const GammaPath zero = GammaPath::constant(0.0, 0.0);
  const PdeSolution sol = solve_zero_temp(kSk, zero, small_grid());
  for (double x : {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0}) {
    CHECK(sol.evaluate(0.0, x).psi ==
          doctest::Approx(heat_closed_form(x)).epsilon(1e-9));
  }
  CHECK(sol.evaluate(0.0, 0.0).psi == doctest::Approx(1.1283791670955126));
}

TEST_CASE("terminal slice is |x|") {
  const PdeSolution sol = solve_zero_temp(kSk, GammaPath::constant(0.0, 0.0), small_grid());
  CHECK(sol.evaluate(1.0, 0.7).psi == doctest::Approx(0.7));
  CHECK(sol.evaluate(1.0, -3.0).psi == doctest::Approx(3.0));
  CHECK(sol.evaluate(1.0, -3.0).psi_x == doctest::Approx(-1.0));
}

TEST_CASE("one-knot cole-hopf step against the dense quadrature oracle") {
  // gamma == 1 on [0,1), xi = r^2: psi(0,0) = log E exp(|sqrt(2) Z|).
  const GammaPath one = GammaPath::constant(0.0, 1.0);
  const PdeSolution sol = solve_zero_temp(kSk, one, small_grid());
  const double oracle = std::log(
      trapezoid_gauss([](double y) { return std::exp(std::abs(y)); }, 0.0,
                      std::sqrt(2.0)));
  CHECK(oracle == doctest::Approx(1.6112323176780705).epsilon(1e-8));  // frozen
  CHECK(sol.evaluate(0.0, 0.0).psi == doctest::Approx(oracle).epsilon(1e-7));
}

TEST_CASE("tabulated cascade step composes like a single step") {
  // Same constant gamma split across two knots must reproduce the one-interval
  // closed form; this exercises interpolation, extension and log-sum-exp.
  const GammaPath split{0.0, {{0.0, 1.0}, {0.5, 1.0}}};
  const GammaPath whole = GammaPath::constant(0.0, 1.0);
  PdeGrid g = small_grid();
  g.n_x = 1601;
  const PdeSolution a = solve_zero_temp(kSk, split, g);
  const PdeSolution b = solve_zero_temp(kSk, whole, g);
  for (double x : {0.0, 0.7, -1.3, 2.5}) {
    CHECK(a.evaluate(0.0, x).psi ==
          doctest::Approx(b.evaluate(0.0, x).psi).epsilon(5e-8));
  }
  const GammaPath split0{0.0, {{0.0, 0.0}, {0.35, 0.0}}};
  const PdeSolution c = solve_zero_temp(kSk, split0, g);
  for (double x : {0.0, 1.0, -2.0})
    CHECK(c.evaluate(0.0, x).psi ==
          doctest::Approx(heat_closed_form(x)).epsilon(5e-8));
}

TEST_CASE("large multipliers: tilted integrand handled by substeps") {
  // With m v well beyond the node range a naive quadrature collapses; the
  // subdivided tabulated route must still match the exact closed form.
  PdeGrid g = small_grid(14.0);
  g.n_x = 2001;
  for (double m : {6.0, 12.0, 34.0}) {
    const GammaPath split{0.0, {{0.0, m}, {0.5, m}}};
    const GammaPath whole = GammaPath::constant(0.0, m);
    const PdeSolution a = solve_zero_temp(kSk, split, g);
    const PdeSolution b = solve_zero_temp(kSk, whole, g);
    for (double x : {0.0, 1.0, -2.0})
      CHECK(a.evaluate(0.0, x).psi ==
            doctest::Approx(b.evaluate(0.0, x).psi).epsilon(2e-6));
  }
}

TEST_CASE("finite-beta terminal and replica-symmetric oracle") {
  const double beta = 2.0;
  const GammaPath rs = GammaPath::constant(0.0, beta);
  const PdeSolution sol = solve_finite_temp(kSk, rs, beta, small_grid());
  CHECK(sol.evaluate(1.0, 0.0).psi == doctest::Approx(0.0));
  CHECK(sol.evaluate(1.0, 0.5).psi ==
        doctest::Approx(std::log(std::cosh(1.0)) / beta));

  // Single-step Cole-Hopf vs dense quadrature: (1/b) log E cosh(b(x+sqrt(2)Z)).
  for (double x : {0.0, 0.3, 0.7}) {
    const double oracle =
        std::log(trapezoid_gauss(
            [&](double y) { return std::cosh(beta * y); }, x, std::sqrt(2.0))) /
        beta;
    CHECK(sol.evaluate(0.0, x).psi == doctest::Approx(oracle).epsilon(1e-8));
  }
  // Closed form of the same quantity: b xi'(1)/2 + (1/b) log cosh(b x).
  CHECK(sol.evaluate(0.0, 0.7).psi ==
        doctest::Approx(beta + std::log(std::cosh(beta * 0.7)) / beta)
            .epsilon(1e-8));
}

TEST_CASE("finite-beta bridges monotonically to the zero-temperature solution") {
  const GammaPath zero = GammaPath::constant(0.0, 0.0);
  const PdeSolution cold = solve_zero_temp(kSk, zero, small_grid());
  double prev_gap = 1e9;
  for (double beta : {2.0, 4.0, 8.0, 16.0}) {
    const PdeSolution warm = solve_finite_temp(kSk, zero, beta, small_grid());
    for (double x : {0.0, 1.0}) {
      const double gap = cold.evaluate(0.0, x).psi - warm.evaluate(0.0, x).psi;
      CHECK(gap >= -1e-9);
    }
    const double gap0 = cold.evaluate(0.0, 0.0).psi - warm.evaluate(0.0, 0.0).psi;
    CHECK(gap0 <= prev_gap + 1e-12);
    prev_gap = gap0;
  }
}

TEST_CASE("gradient bound, oddness, monotonicity, convexity") {
  const GammaPath gpath{0.0, {{0.0, 0.4}, {0.3, 1.2}, {0.7, 2.0}}};
  PdeGrid g = small_grid();
  g.t_eval = {0.0, 0.2, 0.5, 0.9};
  const MixtureSpec mixed{{{2, 0.8}, {3, 0.4}}};
  const PdeSolution sol = solve_zero_temp(mixed, gpath, g);
  for (const auto& s : sol.slices) {
    for (double v : s.psi_x) CHECK(std::abs(v) <= 1.0 + 1e-9);
    // convexity: nonnegative second differences
    for (std::size_t j = 1; j + 1 < s.psi.size(); ++j)
      CHECK(s.psi[j + 1] - 2.0 * s.psi[j] + s.psi[j - 1] >= -1e-9);
  }
  // d_x psi(t, 0) = 0 and strictly increasing in the bulk
  const auto e0 = sol.evaluate(0.0, 0.0);
  CHECK(e0.psi_x == doctest::Approx(0.0).epsilon(1e-12));
  const auto& s0 = sol.slices[sol.slice_index(0.0)];
  const int n = static_cast<int>(s0.psi_x.size());
  const int lo = n / 2 - n / 4, hi = n / 2 + n / 4;
  for (int j = lo; j < hi; ++j) CHECK(s0.psi_x[j + 1] > s0.psi_x[j]);
}

TEST_CASE("lipschitz continuity in gamma") {
  // |psi_gamma(0,x) - psi_gamma'(0,x)| <= 2 xi''(1) ||gamma - gamma'||_L1
  const MixtureSpec m{{{2, 1.0}, {4, 0.5}}};
  const double bound_coef = 2.0 * xi_second(m, 1.0);
  const std::vector<std::pair<GammaPath, GammaPath>> pairs = {
      {GammaPath::constant(0.0, 0.5), GammaPath::constant(0.0, 1.5)},
      {GammaPath{0.0, {{0.0, 0.1}, {0.4, 2.0}}},
       GammaPath{0.0, {{0.0, 0.4}, {0.6, 1.0}}}},
      {GammaPath{0.0, {{0.0, 0.0}, {0.25, 0.7}, {0.75, 3.0}}},
       GammaPath::constant(0.0, 0.0)},
  };
  for (const auto& [ga, gb] : pairs) {
    const PdeSolution sa = solve_zero_temp(m, ga, small_grid(12.0));
    const PdeSolution sb = solve_zero_temp(m, gb, small_grid(12.0));
    double max_diff = 0.0;
    const auto& slice_a = sa.slices[sa.slice_index(0.0)];
    const auto& slice_b = sb.slices[sb.slice_index(0.0)];
    for (std::size_t j = 0; j < slice_a.psi.size(); ++j)
      max_diff = std::max(max_diff, std::abs(slice_a.psi[j] - slice_b.psi[j]));
    CHECK(max_diff <= bound_coef * l1_distance(ga, gb) + 1e-6);
  }
}

TEST_CASE("refinement stability on the SK mixture") {
  const GammaPath gpath{0.0, {{0.0, 0.3}, {0.5, 1.1}}};
  PdeGrid coarse;
  coarse.x_max = 10.0;
  coarse.n_x = 2001;
  coarse.quad_order = 40;
  coarse.t_eval = {0.0};
  PdeGrid fine = coarse;
  fine.n_x = 4001;
  fine.quad_order = 80;
  const double a = solve_zero_temp(kSk, gpath, coarse).evaluate(0.0, 0.0).psi;
  const double b = solve_zero_temp(kSk, gpath, fine).evaluate(0.0, 0.0).psi;
  CHECK(std::abs(a - b) <= 1e-6);
}

TEST_CASE("solver rejects bad grids and undersized boxes") {
  PdeGrid even = small_grid();
  even.n_x = 800;
  CHECK_THROWS(solve_zero_temp(kSk, GammaPath::constant(0.0, 0.0), even));
  PdeGrid lowq = small_grid();
  lowq.quad_order = 8;
  CHECK_THROWS(solve_zero_temp(kSk, GammaPath::constant(0.0, 0.0), lowq));
  PdeGrid tiny = small_grid(2.0);  // box far below |h| + 6 sqrt(xi'(1))
  CHECK_THROWS(solve_zero_temp(kSk, GammaPath::constant(0.0, 0.0), tiny));
}

TEST_CASE("evaluate snaps within 1e-9 and rejects unknown times") {
  const PdeSolution sol = solve_zero_temp(kSk, GammaPath::constant(0.0, 0.0), small_grid());
  CHECK_NOTHROW(sol.evaluate(1e-10, 0.0));
  CHECK_THROWS(sol.evaluate(0.123456, 0.0));
  CHECK_THROWS(sol.evaluate(0.0, 100.0));
}

TEST_CASE("serial and parallel cascade agree bitwise") {
  const GammaPath gpath{0.0, {{0.0, 0.5}, {0.5, 1.5}}};
  const PdeSolution a = solve_zero_temp(kSk, gpath, small_grid(), exec::Policy::serial);
  const PdeSolution b = solve_zero_temp(kSk, gpath, small_grid(), exec::Policy::parallel);
  REQUIRE(a.slices.size() == b.slices.size());
  for (std::size_t s = 0; s < a.slices.size(); ++s)
    for (int j = 0; j < a.n_x; ++j)
      CHECK(a.slices[s].psi[j] == b.slices[s].psi[j]);
}
