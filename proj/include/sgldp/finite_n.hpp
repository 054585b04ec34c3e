#pragma once

#include <cstdint>
#include <vector>

#include "sgldp/exec.hpp"
#include "sgldp/mixture.hpp"

namespace sgldp {

// One draw of the couplings: for each power p a dense rank-p tensor of i.i.d.
// standard gaussians scaled by beta_p N^{-(p-1)/2}, plus per-site fields.
// This construction realizes E[H'(sigma) H'(tau)] = N xi(sigma.tau/N) exactly.
struct DisorderSample {
  int N = 0;
  std::vector<double> field;  // per-site external field
  struct Tensor {
    int p = 2;
    double scale = 0.0;
    std::vector<double> g;  // row-major, N^p entries
  };
  std::vector<Tensor> tensors;
};

DisorderSample sample_disorder(const MixtureSpec& m, int N, double h,
                               std::uint64_t seed);
DisorderSample sample_disorder(const MixtureSpec& m, int N, const FieldSpec& f,
                               std::uint64_t seed);

// Direct evaluation (test oracle and small utilities).
double hamiltonian(const DisorderSample& d, const std::vector<int>& sigma);

// L_N: exact maximum of H/N over all 2^N spin configurations, enumerated by
// Gray code with incremental updates for p = 2 and full recomputation of the
// p >= 3 parts.
double ground_state_exact(const DisorderSample& d);

struct EmpiricalEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int n_disorder = 0;
  int N = 0;
  bool bound_only = false;  // tail estimate with zero hits
};

// (1/N) log E exp(s N L_N) by disorder Monte Carlo, log-sum-exp inside,
// jackknife standard error.
EmpiricalEstimate empirical_lambda(const MixtureSpec& m, double h, int N,
                                   double s, int n_disorder, std::uint64_t seed,
                                   exec::Policy policy = exec::Policy::parallel);

// (1/sN) log E[Z_N(beta)^{s/beta}] with Z_N(beta) = 2^-N sum exp(beta H).
EmpiricalEstimate fractional_moment_mc(const MixtureSpec& m, const FieldSpec& f,
                                       int N, double s, double beta,
                                       int n_disorder, std::uint64_t seed,
                                       exec::Policy policy = exec::Policy::parallel);

// -(1/N) log P[L_N >= r]; reports a one-sided bound when no sample hits.
EmpiricalEstimate tail_probability(const MixtureSpec& m, double h, int N,
                                   double r, int n_disorder, std::uint64_t seed,
                                   exec::Policy policy = exec::Policy::parallel);

}  // namespace sgldp
