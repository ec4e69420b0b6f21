// Walks through the equivalence machinery on a few controlled branching
// processes: which ones admit an exact PSDBP representation, and what the
// constructed offspring laws look like.

#include <cstdio>

#include "bplink/bplink.hpp"

using namespace bplink;

namespace {

void report(const char* title, const CbpSpec& cbp, i64 z0, i64 cap) {
  EquivalenceVerdict v = decide_equivalence(cbp, z0, cap);
  const char* outcome = v.outcome == EqOutcome::yes  ? "yes"
                        : v.outcome == EqOutcome::no ? "no"
                                                     : "unknown";
  std::printf("%-52s -> %-7s rule=%s\n", title, outcome, v.rule.c_str());
  if (v.outcome == EqOutcome::yes && v.construction_available) {
    PsdbpSpec psdbp = construct_equivalent_psdbp(cbp, z0, cap);
    for (i64 z : {1, 2, 3, 6}) {
      std::printf("    offspring(z=%lld) = %s\n", static_cast<long long>(z),
                  format_distribution(psdbp.family->offspring(z)).c_str());
    }
  }
}

}  // namespace

int main() {
  // Deterministic control doubling the population, Bernoulli offspring.
  report("phi(z)=2z, Ber(1/2) offspring",
         CbpSpec{DeterministicControl{ControlMap::affine_floor(Rational(2), Rational(0))},
                 Distribution::bernoulli(Rational(1, 2))},
         1, 64);

  // Odd states reproduce fully, even states at half strength.
  report("parity-half control, Bin(2,1/2) offspring",
         CbpSpec{DeterministicControl{ControlMap::parity_half()},
                 Distribution::binomial(2, Rational(1, 2))},
         1, 64);

  // One fewer parent than the population, Poisson offspring.
  report("phi(z)=max(z-1,0), Poi(3) offspring",
         CbpSpec{DeterministicControl{ControlMap::max_shift(1)},
                 Distribution::poisson(Rational(3))},
         2, 64);

  // Binomial control with trials z+2: not divisible at every state.
  report("Bin(z+2, 1/3) control, Poi(3) offspring",
         CbpSpec{BinomialControl{ControlMap::shift_gated(2), RateRef::constant(Rational(1, 3))},
                 Distribution::poisson(Rational(3))},
         1, 64);

  // Same control with geometric offspring: equivalent, but not constructive.
  report("Bin(z+2, 1/3) control, Geom(1/2) offspring",
         CbpSpec{BinomialControl{ControlMap::shift_gated(2), RateRef::constant(Rational(1, 3))},
                 Distribution::geometric(Rational(1, 2))},
         1, 64);

  // Immigration at zero: no PSDBP can match.
  report("(z+1)Ber(e^{-z/1000}) control, Bin(5,1/5) offspring",
         CbpSpec{ScaledBernoulliControl{ControlMap::affine_floor(Rational(1), Rational(1)),
                                        RateRef::exp_gate(1000)},
                 Distribution::binomial(5, Rational(1, 5))},
         1, 64);
  return 0;
}
