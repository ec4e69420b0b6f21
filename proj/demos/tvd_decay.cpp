// Estimates the total variation distance between the carrying-capacity
// PSDBP/CBP pair at a few initial sizes and compares one-step estimates with
// exact enumeration.

#include <cstdio>

#include "bplink/bplink.hpp"

using namespace bplink;

int main() {
  const Rational lambda(3);
  const i64 M = 2;
  PairFactory factory = carrying_capacity_pair_factory(lambda, M);

  std::printf("%6s %10s %12s %12s %12s\n", "K", "exact(k=1)", "estimate", "stderr", "k=5 est");
  for (i64 K : {10, 25, 50, 100}) {
    auto [psdbp, cbp] = factory(K);
    TransitionKernel kp{ProcessSpec{psdbp}};
    TransitionKernel kc{ProcessSpec{cbp}};
    ExactTvd exact = exact_one_step_tvd(kp, kc, K);
    TvdEstimate est1 = estimate_path_tvd(kp, kc, K, 1, 50000, 7);
    TvdEstimate est5 = estimate_path_tvd(kp, kc, K, 5, 50000, 7);
    std::printf("%6lld %10.6f %12.6f %12.6f %12.6f\n", static_cast<long long>(K), exact.value,
                est1.value, est1.std_error, est5.value);
  }
  std::printf("\nTVD decays in K and grows with path length k.\n");
  return 0;
}
