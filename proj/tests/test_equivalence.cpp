#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "bplink/equivalence.hpp"
#include "test_support.hpp"

using namespace bplink;
using bplink_test::TestRng;

namespace {

CbpSpec fig2_spec() {
  return {ScaledBernoulliControl{ControlMap::affine_floor(Rational(1), Rational(1)),
                                 RateRef::exp_gate(1000)},
          Distribution::binomial(5, Rational(1, 5))};
}

CbpSpec parity_spec() {
  return {DeterministicControl{ControlMap::parity_half()},
          Distribution::binomial(2, Rational(1, 2))};
}

}  // namespace

TEST_CASE("control divisibility") {
  // Poisson control with psi(0) = 0 is infinitely divisible
  CbpSpec poi{PoissonControl{ControlMap::affine_floor(Rational(2), Rational(0))},
              Distribution::bernoulli(Rational(1, 2))};
  ControlDivisibilityResult r1 = control_divisibility(poi, 1, 100);
  CHECK(r1.outcome == Divisibility::divisible);
  CHECK_FALSE(r1.truncated);

  // binomial control with psi(z) = 3z: component Bin(3, q) at every z
  CbpSpec bin3z{BinomialControl{ControlMap::affine_floor(Rational(3), Rational(0)),
                                RateRef::constant(Rational(1, 4))},
                Distribution::poisson(Rational(1))};
  ControlDivisibilityResult r2 = control_divisibility(bin3z, 1, 100);
  CHECK(r2.outcome == Divisibility::divisible);
  auto comp = divide(control_law(bin3z.control, 5), 5);
  REQUIRE(comp.component.has_value());
  const auto* b = comp.component->get_if<Distribution::Binomial>();
  REQUIRE(b != nullptr);
  CHECK(b->n == 3);
  CHECK(b->p == 0.25);

  // psi(z) = (z+1) 1{z>0} fails at the first state not dividing psi
  CbpSpec binz1{BinomialControl{ControlMap::shift_gated(1), RateRef::constant(Rational(1, 2))},
                Distribution::poisson(Rational(1))};
  ControlDivisibilityResult r3 = control_divisibility(binz1, 2, 100);
  CHECK(r3.outcome == Divisibility::not_divisible);
  REQUIRE(r3.witness.has_value());
  CHECK(*r3.witness == 2);

  // an ungated psi(z) = z + 1 instead allows immigration, which dominates
  CbpSpec ungated{BinomialControl{ControlMap::affine_floor(Rational(1), Rational(1)),
                                  RateRef::constant(Rational(1, 2))},
                  Distribution::poisson(Rational(1))};
  CHECK(control_divisibility(ungated, 2, 100).rule == "immigration-at-zero");

  // immigration at zero fails outright
  ControlDivisibilityResult r4 = control_divisibility(fig2_spec(), 1, 60);
  CHECK(r4.outcome == Divisibility::not_divisible);
  CHECK(r4.rule == "immigration-at-zero");
}

TEST_CASE("y-set computation") {
  YSet ys = y_set(parity_spec(), 1, 60);
  CHECK(ys.values == std::vector<i64>{1, 2});

  // max-shift control, unbounded offspring: every attainable z >= 2 has y = z
  CbpSpec maxshift{DeterministicControl{ControlMap::max_shift(1)},
                   Distribution::poisson(Rational(3))};
  YSet ys2 = y_set(maxshift, 2, 50);
  std::vector<i64> want(50);
  std::iota(want.begin(), want.end(), 1);
  CHECK(ys2.values == want);
  CHECK(ys2.truncated);

  // identity control: gcd(z, z) = z, so y = 1 everywhere
  CbpSpec ident{DeterministicControl{ControlMap::identity()}, Distribution::poisson(Rational(3))};
  YSet ys3 = y_set(ident, 3, 50);
  CHECK(ys3.values == std::vector<i64>{1});

  CHECK_THROWS_AS(y_set(fig2_spec(), 1, 50), ValidationError);
}

TEST_CASE("decide_equivalence rule chain") {
  // immigration at zero
  EquivalenceVerdict v1 = decide_equivalence(fig2_spec(), 1, 60);
  CHECK(v1.outcome == EqOutcome::no);
  CHECK(v1.rule == "immigration-at-zero");

  // z-divisible random controls
  CbpSpec poi{PoissonControl{ControlMap::affine_floor(Rational(2), Rational(0))},
              Distribution::binomial(2, Rational(1, 2))};
  EquivalenceVerdict v2 = decide_equivalence(poi, 1, 60);
  CHECK(v2.outcome == EqOutcome::yes);
  CHECK(v2.rule == "divisible-control");
  CHECK(v2.construction_available);

  CbpSpec nb{NegBinControl{ControlMap::affine_floor(Rational(1), Rational(0)),
                           RateRef::constant(Rational(1, 2))},
             Distribution::binomial(2, Rational(1, 2))};
  EquivalenceVerdict v3 = decide_equivalence(nb, 1, 60);
  CHECK(v3.outcome == EqOutcome::yes);
  CHECK(v3.rule == "divisible-control");

  // deterministic iff: max-shift with Poisson offspring is equivalent
  CbpSpec maxshift{DeterministicControl{ControlMap::max_shift(1)},
                   Distribution::poisson(Rational(3))};
  EquivalenceVerdict v4 = decide_equivalence(maxshift, 2, 60);
  CHECK(v4.outcome == EqOutcome::yes);
  CHECK(v4.rule == "deterministic-offspring-divisible");
  CHECK_FALSE(v4.audited_range_only);
  CHECK(v4.construction_available);

  // max-shift with Bernoulli offspring is not (y = z needs z-divisibility)
  CbpSpec maxshift_ber{DeterministicControl{ControlMap::max_shift(1)},
                       Distribution::bernoulli(Rational(1, 2))};
  EquivalenceVerdict v5 = decide_equivalence(maxshift_ber, 2, 60);
  CHECK(v5.outcome == EqOutcome::no);

  // binomial control + Poisson offspring, non-divisible control
  CbpSpec rem47{BinomialControl{ControlMap::shift_gated(2), RateRef::constant(Rational(1, 3))},
                Distribution::poisson(Rational(3))};
  EquivalenceVerdict v6 = decide_equivalence(rem47, 1, 60);
  CHECK(v6.outcome == EqOutcome::no);
  CHECK(v6.rule == "binomial-control-poisson-offspring");

  // binomial control + geometric offspring: yes, but no closed components
  CbpSpec geo{BinomialControl{ControlMap::shift_gated(2), RateRef::constant(Rational(1, 3))},
              Distribution::geometric(Rational(1, 2))};
  EquivalenceVerdict v7 = decide_equivalence(geo, 1, 60);
  CHECK(v7.outcome == EqOutcome::yes);
  CHECK(v7.rule == "binomial-control-geometric-offspring");
  CHECK_FALSE(v7.construction_available);
  CHECK_THROWS_AS(construct_equivalent_psdbp(geo, 1, 60), ConstructionUnavailableError);

  // outside the catalog
  CbpSpec odd{BinomialControl{ControlMap::shift_gated(2), RateRef::constant(Rational(1, 3))},
              Distribution::binomial(3, Rational(1, 2))};
  EquivalenceVerdict v8 = decide_equivalence(odd, 1, 60);
  CHECK(v8.outcome == EqOutcome::unknown);
  CHECK(v8.rule == "outside-rule-catalog");
}

TEST_CASE("anti-symmetry: immigration at zero never returns yes") {
  // even with an infinitely divisible control family, psi(0) > 0 forces no
  CbpSpec poi_imm{PoissonControl{ControlMap::affine_floor(Rational(1), Rational(1))},
                  Distribution::poisson(Rational(2))};
  EquivalenceVerdict v = decide_equivalence(poi_imm, 1, 60);
  CHECK(v.outcome == EqOutcome::no);
  CHECK(v.rule == "immigration-at-zero");
}

TEST_CASE("constructed equivalents match the worked examples") {
  // phi(z) = 2z with Ber(1/2): offspring Bin(2, 1/2) at every state
  CbpSpec doubling{DeterministicControl{ControlMap::affine_floor(Rational(2), Rational(0))},
                   Distribution::bernoulli(Rational(1, 2))};
  PsdbpSpec c1 = construct_equivalent_psdbp(doubling, 1, 60);
  for (i64 z : {1, 2, 5, 12}) {
    const auto* b = c1.family->offspring(z).get_if<Distribution::Binomial>();
    REQUIRE(b != nullptr);
    CHECK(b->n == 2);
    CHECK(b->p == 0.5);
  }

  // parity-half control: Bin(2,1/2) at odd states, Ber(1/2) at even states
  PsdbpSpec c2 = construct_equivalent_psdbp(parity_spec(), 4, 60);
  CHECK(c2.family->offspring(3).get_if<Distribution::Binomial>() != nullptr);
  CHECK(c2.family->offspring(4).get_if<Distribution::Bernoulli>() != nullptr);

  // max-shift + Poisson: offspring Poi((z-1) lambda / z); at z = 1 the rate
  // vanishes and the law degenerates to a point mass at zero
  CbpSpec maxshift{DeterministicControl{ControlMap::max_shift(1)},
                   Distribution::poisson(Rational(3))};
  PsdbpSpec c3 = construct_equivalent_psdbp(maxshift, 2, 60);
  CHECK(c3.family->offspring(1).get_if<Distribution::PointMass>()->c == 0);
  for (i64 z : {2, 7, 31}) {
    const auto* p = c3.family->offspring(z).get_if<Distribution::Poisson>();
    REQUIRE(p != nullptr);
    CHECK(p->mu == (Rational(z - 1) * Rational(3) / Rational(z)).to_double());
  }

  // random Poisson control: compound offspring audited against the CBP kernel
  CbpSpec poi{PoissonControl{ControlMap::affine_floor(Rational(2), Rational(0))},
              Distribution::binomial(2, Rational(1, 2))};
  PsdbpSpec c4 = construct_equivalent_psdbp(poi, 1, 40);
  TransitionKernel ka{ProcessSpec{poi}};
  TransitionKernel kb{ProcessSpec{c4}};
  AttainableSet att = attainable_set(ProcessSpec{poi}, 1, 30);
  KernelComparison cmp = compare_kernels(ka, kb, att.states);
  CHECK(cmp.max_abs_diff <= 1e-12);
  CHECK(cmp.min_row_mass >= 1.0 - 1e-10);
}

TEST_CASE("soundness: constructive yes verdicts pass pointwise kernel equality") {
  std::vector<std::pair<CbpSpec, i64>> cases;
  cases.emplace_back(parity_spec(), 4);
  cases.emplace_back(CbpSpec{DeterministicControl{ControlMap::max_shift(1)},
                             Distribution::poisson(Rational(1))},
                     2);
  cases.emplace_back(CbpSpec{DeterministicControl{ControlMap::affine_floor(Rational(2), Rational(0))},
                             Distribution::geometric(Rational(1, 2))},
                     1);
  cases.emplace_back(CbpSpec{BinomialControl{ControlMap::affine_floor(Rational(2), Rational(0)),
                                             RateRef::constant(Rational(1, 3))},
                             Distribution::bernoulli(Rational(1, 2))},
                     1);
  for (const auto& [cbp, z0] : cases) {
    EquivalenceVerdict v = decide_equivalence(cbp, z0, 40);
    REQUIRE(v.outcome == EqOutcome::yes);
    REQUIRE(v.construction_available);
    PsdbpSpec built = construct_equivalent_psdbp(cbp, z0, 40);
    TransitionKernel ka{ProcessSpec{cbp}};
    TransitionKernel kb{ProcessSpec{built}};
    AttainableSet att = attainable_set(ProcessSpec{cbp}, z0, 40);
    KernelComparison cmp = compare_kernels(ka, kb, att.states);
    CHECK(cmp.max_abs_diff <= 1e-12);
  }
}

TEST_CASE("deterministic iff agrees with the series-root oracle on random DCBPs") {
  TestRng rng(424242);
  int yes_count = 0, no_count = 0;
  for (int rep = 0; rep < 60; ++rep) {
    // random finite offspring on [0, s], s <= 4
    i64 s = rng.uniform_int(1, 4);
    std::vector<i64> values;
    std::vector<double> probs;
    double left = 1.0;
    for (i64 v = 0; v <= s; ++v) {
      values.push_back(v);
      double p = v == s ? left : left * rng.uniform(0.05, 0.8);
      probs.push_back(p);
      left -= p;
    }
    Distribution offspring = Distribution::finite_support(values, probs);

    // random control table on states 0..12 with phi(0) = 0
    std::map<i64, i64> tab;
    tab[0] = 0;
    for (i64 z = 1; z <= 12; ++z) tab[z] = rng.uniform_int(0, 10);
    CbpSpec dcbp{DeterministicControl{ControlMap::table(tab, ControlMap::Table::Fallback::zero)},
                 offspring};
    i64 z0 = rng.uniform_int(1, 4);
    const i64 cap = 12;

    // oracle: offspring must be y-divisible for every y in the y-set; the
    // pgf root series decides that and provides components
    YSet ys = y_set(dcbp, z0, cap);
    DivisibilityRegistry registry;
    bool oracle_yes = true;
    std::vector<double> dense = bplink_test::dense_pmf(offspring, s);
    for (i64 y : ys.values) {
      if (y == 1) continue;
      auto root = bplink_test::pgf_nth_root(dense, y);
      if (root) {
        std::vector<i64> cv;
        std::vector<double> cp;
        for (std::size_t i = 0; i < root->size(); ++i) {
          if ((*root)[i] > 0.0) {
            cv.push_back(static_cast<i64>(i));
            cp.push_back((*root)[i]);
          }
        }
        registry.add(offspring, y,
                     DivisibilityVerdict::yes(
                         Distribution::finite_support_truncated(cv, cp, 1e-6), "oracle"));
      } else {
        oracle_yes = false;
        registry.add(offspring, y, DivisibilityVerdict::no("oracle"));
      }
    }
    EquivalenceVerdict v = decide_equivalence(dcbp, z0, cap, &registry);
    INFO("rep " << rep << " y-set size " << ys.values.size());
    REQUIRE(v.outcome != EqOutcome::unknown);
    CHECK((v.outcome == EqOutcome::yes) == oracle_yes);
    (oracle_yes ? yes_count : no_count) += 1;

    // sound construction whenever components were registered
    if (v.outcome == EqOutcome::yes && v.construction_available) {
      PsdbpSpec built = construct_equivalent_psdbp(dcbp, z0, cap, &registry, 1e-12, 1e-5);
      TransitionKernel ka{ProcessSpec{dcbp}};
      TransitionKernel kb{ProcessSpec{built}};
      AttainableSet att = attainable_set(ProcessSpec{dcbp}, z0, cap);
      KernelComparison cmp = compare_kernels(ka, kb, att.states);
      CHECK(cmp.max_abs_diff <= 1e-5);
    }
  }
  // the catalog must exercise both directions of the iff
  CHECK(yes_count > 5);
  CHECK(no_count > 5);
}
