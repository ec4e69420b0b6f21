#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/kernel.hpp"
#include "bplink/parallel.hpp"
#include "bplink/process.hpp"
#include "bplink/rng.hpp"

namespace bplink {

struct ExactTvd {
  double value = 0.0;
  double truncation_error = 0.0;
};

// Half the l1 distance between two pmfs, summed over the union of truncated
// supports; the mass dropped by truncation is reported, not silently lost.
inline ExactTvd exact_tvd(const Distribution& a, const Distribution& b,
                          double tail_tol = kDefaultTailTol) {
  SupportWindow wa = a.truncated_support(tail_tol / 2.0);
  SupportWindow wb = b.truncated_support(tail_tol / 2.0);
  i64 lo = std::min(wa.lo, wb.lo);
  i64 hi = std::max(wa.hi, wb.hi);
  double sum = 0.0;
  for (i64 n = lo; n <= hi; ++n) sum += std::abs(a.pmf(n) - b.pmf(n));
  return {0.5 * sum, 0.5 * (wa.omitted + wb.omitted)};
}

inline ExactTvd exact_one_step_tvd(const TransitionKernel& a, const TransitionKernel& b, i64 z) {
  auto ra = a.row(z);
  auto rb = b.row(z);
  i64 lo = std::min(ra->lo, rb->lo);
  i64 hi = std::max(ra->hi(), rb->hi());
  double sum = 0.0;
  for (i64 n = lo; n <= hi; ++n) sum += std::abs(ra->pmf_at(n) - rb->pmf_at(n));
  return {0.5 * sum, 0.5 * ((1.0 - ra->mass) + (1.0 - rb->mass))};
}

enum class SampleSide { psdbp, cbp };

inline const char* to_string(SampleSide s) { return s == SampleSide::psdbp ? "psdbp" : "cbp"; }

// Importance-sampling estimate of the k-step path TVD.
struct TvdEstimate {
  double value = 0.0;      // mean of per-path terms; can exceed 1 in noise
  double std_error = 0.0;  // sample standard deviation / sqrt(replicates)
  i64 replicates = 0;
  u64 seed = 0;
  SampleSide sampled_side = SampleSide::psdbp;
};

// Paths per reduction chunk. Fixed so that chunk boundaries, and therefore
// the final fold, are independent of the worker count.
inline constexpr i64 kTvdChunk = 4096;

// Samples N k-step paths from the chosen side, evaluates both path
// log-likelihoods through the transition kernels, and averages the stable
// per-path term |expm1(logL_other - logL_self)| / 2.
inline TvdEstimate estimate_path_tvd(const TransitionKernel& psdbp, const TransitionKernel& cbp,
                                     i64 z0, i64 k, i64 n_paths, u64 seed,
                                     SampleSide side = SampleSide::psdbp,
                                     const ParallelOptions& par = ParallelOptions::from_env()) {
  if (n_paths < 1 || k < 1) throw ValidationError("estimate_path_tvd: need N >= 1 and k >= 1");
  const TransitionKernel& self = side == SampleSide::psdbp ? psdbp : cbp;
  const TransitionKernel& other = side == SampleSide::psdbp ? cbp : psdbp;

  i64 n_chunks = (n_paths + kTvdChunk - 1) / kTvdChunk;
  std::vector<double> chunk_sum(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<double> chunk_sumsq(static_cast<std::size_t>(n_chunks), 0.0);

  parallel_chunks(n_paths, kTvdChunk, par.resolve(), [&](i64 c, i64 begin, i64 end) {
    double sum = 0.0, sumsq = 0.0;
    for (i64 i = begin; i < end; ++i) {
      RngStream stream = RngStream::derive(seed, {rng_domain::tvd_path, static_cast<u64>(i)});
      i64 cur = z0;
      double log_self = 0.0, log_other = 0.0;
      for (i64 step = 0; step < k; ++step) {
        auto row = self.row(cur);
        i64 next = row->sample(stream.next_double());
        double lp_self = self.log_transition_pmf(cur, next);
        if (lp_self == kNegInf)
          throw LikelihoodUnderflowError(
              "sampled transition " + std::to_string(cur) + " -> " + std::to_string(next) +
              " has zero probability under the sampling side; tighten tail_tol");
        log_self += lp_self;
        log_other += other.log_transition_pmf(cur, next);
        cur = next;
      }
      double term = 0.5 * std::abs(std::expm1(log_other - log_self));
      sum += term;
      sumsq += term * term;
    }
    chunk_sum[static_cast<std::size_t>(c)] = sum;
    chunk_sumsq[static_cast<std::size_t>(c)] = sumsq;
  });

  double sum = 0.0, sumsq = 0.0;
  for (i64 c = 0; c < n_chunks; ++c) {
    sum += chunk_sum[static_cast<std::size_t>(c)];
    sumsq += chunk_sumsq[static_cast<std::size_t>(c)];
  }
  TvdEstimate est;
  est.replicates = n_paths;
  est.seed = seed;
  est.sampled_side = side;
  double n = static_cast<double>(n_paths);
  est.value = sum / n;
  if (n_paths > 1) {
    double var = std::max(0.0, (sumsq - n * est.value * est.value) / (n - 1.0));
    est.std_error = std::sqrt(var / n);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Sweeps over (K, k) grids for a parameterized pair family.

enum class Z0Rule { one, carrying_capacity };

inline const char* to_string(Z0Rule r) { return r == Z0Rule::one ? "one" : "carrying_capacity"; }

struct SweepCell {
  i64 K = 0;
  i64 k = 0;
  i64 z0 = 0;
  TvdEstimate estimate;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by (K, k)
  u64 master_seed = 0;
  i64 n_paths = 0;
  Z0Rule z0_rule = Z0Rule::one;
};

using PairFactory = std::function<std::pair<PsdbpSpec, CbpSpec>(i64 K)>;

// One estimate per (K, k); each cell draws from its own stream derived from
// the master seed, so the grid shape does not perturb any cell's result.
inline SweepResult sweep(const PairFactory& make_pair_specs, const std::vector<i64>& K_grid,
                         const std::vector<i64>& k_grid, Z0Rule z0_rule, i64 n_paths, u64 seed,
                         SampleSide side = SampleSide::psdbp, double tail_tol = kDefaultTailTol,
                         const ParallelOptions& par = ParallelOptions::from_env()) {
  if (K_grid.empty() || k_grid.empty()) throw ValidationError("sweep: empty grid");
  SweepResult out;
  out.master_seed = seed;
  out.n_paths = n_paths;
  out.z0_rule = z0_rule;
  std::vector<i64> Ks = K_grid, ks = k_grid;
  std::sort(Ks.begin(), Ks.end());
  std::sort(ks.begin(), ks.end());
  for (i64 K : Ks) {
    auto [psdbp, cbp] = make_pair_specs(K);
    TransitionKernel psdbp_kernel{ProcessSpec{psdbp}, tail_tol};
    TransitionKernel cbp_kernel{ProcessSpec{cbp}, tail_tol};
    for (i64 k : ks) {
      SweepCell cell;
      cell.K = K;
      cell.k = k;
      cell.z0 = z0_rule == Z0Rule::one ? 1 : K;
      u64 cell_seed = RngStream::derive_key(
          seed, {rng_domain::sweep_cell, static_cast<u64>(K), static_cast<u64>(k),
                 z0_rule == Z0Rule::one ? u64{1} : u64{2}});
      cell.estimate =
          estimate_path_tvd(psdbp_kernel, cbp_kernel, cell.z0, k, n_paths, cell_seed, side, par);
      out.cells.push_back(cell);
    }
  }
  return out;
}

// The moment-matched pair used for the TVD sweeps: NB-offspring PSDBP vs
// binomial-control/Poisson CBP with carrying capacity K.
inline PairFactory carrying_capacity_pair_factory(Rational lambda, i64 M) {
  return [lambda, M](i64 K) {
    PsdbpSpec psdbp{std::make_shared<NbCarryingCapacityFamily>(lambda, M, Rational(K))};
    CbpSpec cbp{BinomialControl{ControlMap::shift_gated(M),
                                RateRef::ex415(Rational(K), M, lambda)},
                Distribution::poisson(lambda)};
    return std::make_pair(psdbp, cbp);
  };
}

}  // namespace bplink
