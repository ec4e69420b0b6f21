#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "bplink/kernel.hpp"
#include "test_support.hpp"

using namespace bplink;

namespace {

PsdbpSpec bh_spec(i64 K = 100) { return {std::make_shared<BinomialBhFamily>(Rational(K))}; }

CbpSpec ex415_cbp(i64 K = 100, i64 M = 2, Rational lambda = Rational(3)) {
  return {BinomialControl{ControlMap::shift_gated(M), RateRef::ex415(Rational(K), M, lambda)},
          Distribution::poisson(lambda)};
}

PsdbpSpec ex415_psdbp(i64 K = 100, i64 M = 2, Rational lambda = Rational(3)) {
  return {std::make_shared<NbCarryingCapacityFamily>(lambda, M, Rational(K))};
}

}  // namespace

TEST_CASE("control maps") {
  CHECK(ControlMap::identity()(7) == 7);
  CHECK(ControlMap::affine_floor(Rational(2), Rational(0))(5) == 10);
  CHECK(ControlMap::affine_floor(Rational(1, 2), Rational(1, 4))(5) == 2);
  CHECK(ControlMap::max_shift(1)(0) == 0);
  CHECK(ControlMap::max_shift(1)(6) == 5);
  CHECK(ControlMap::shift_gated(2)(0) == 0);
  CHECK(ControlMap::shift_gated(2)(6) == 8);
  CHECK(ControlMap::parity_half()(7) == 7);
  CHECK(ControlMap::parity_half()(8) == 4);
  auto table = ControlMap::table({{2, 9}}, ControlMap::Table::Fallback::zero);
  CHECK(table(2) == 9);
  CHECK(table(3) == 0);
}

TEST_CASE("conditional moments") {
  // Beverton-Holt mean 2Kz/(K+z) at z = K is K
  ConditionalMoments bh = conditional_moments(ProcessSpec{bh_spec(100)}, 100);
  CHECK(bh.mean == Catch::Approx(100.0).epsilon(1e-12));
  REQUIRE(bh.mean_exact.has_value());
  CHECK(*bh.mean_exact == Rational(100));

  // deterministic control: (phi m, phi s2)
  CbpSpec dcbp{DeterministicControl{ControlMap::max_shift(1)},
               Distribution::binomial(2, Rational(1, 2))};
  ConditionalMoments dm = conditional_moments(ProcessSpec{dcbp}, 5);
  CHECK(dm.mean == 4.0);
  CHECK(dm.variance == 2.0);

  // carrying-capacity CBP has conditional mean K at z = K
  ConditionalMoments cm = conditional_moments(ProcessSpec{ex415_cbp()}, 100);
  REQUIRE(cm.mean_exact.has_value());
  CHECK(*cm.mean_exact == Rational(100));
}

TEST_CASE("transition pmf closed forms and absorbing state") {
  PsdbpSpec scaled{std::make_shared<PoissonScaledFamily>(Rational(3))};
  TransitionKernel k{ProcessSpec{scaled}};
  for (i64 z : {1, 2, 7, 30}) {
    Distribution want = Distribution::poisson(Rational(3) * Rational(z - 1));
    for (i64 b : {0, 1, 5, 20})
      CHECK(k.transition_pmf(z, b) == want.pmf(b));
  }
  CHECK(k.transition_pmf(0, 0) == 1.0);
  CHECK(k.transition_pmf(0, 3) == 0.0);
  CHECK(k.log_transition_pmf(0, 3) == kNegInf);
}

TEST_CASE("compound transition pmf matches Monte Carlo", "[slow]") {
  CbpSpec cbp = ex415_cbp();
  TransitionKernel kernel{ProcessSpec{cbp}};
  const i64 a = 10, b = 12;
  double p = kernel.transition_pmf(a, b);
  // oracle: direct simulation of one step
  RngStream s = RngStream::derive(1234, {77});
  Distribution ctrl = control_law(cbp.control, a);
  const i64 n = 10000000;
  i64 hits = 0;
  for (i64 i = 0; i < n; ++i) {
    i64 parents = ctrl.sample(s);
    i64 next = 0;
    for (i64 j = 0; j < parents; ++j) next += cbp.offspring.sample(s);
    if (next == b) ++hits;
  }
  double freq = static_cast<double>(hits) / static_cast<double>(n);
  double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
  CHECK(std::abs(freq - p) < 4.0 * se);
}

TEST_CASE("row sums and conditional-moment agreement") {
  std::vector<ProcessSpec> specs;
  specs.push_back(ProcessSpec{bh_spec(50)});
  specs.push_back(ProcessSpec{ex415_psdbp(50)});
  specs.push_back(ProcessSpec{ex415_cbp(50)});
  specs.push_back(ProcessSpec{PsdbpSpec{std::make_shared<ThreePointMatchedFamily>()}});
  specs.push_back(ProcessSpec{CbpSpec{DeterministicControl{ControlMap::max_shift(1)},
                                      Distribution::binomial(2, Rational(1, 2))}});
  for (const auto& spec : specs) {
    TransitionKernel kernel{spec};
    for (i64 a : {1, 5, 17, 50}) {
      auto row = kernel.row(a);
      CHECK(row->mass >= 1.0 - 10.0 * kernel.tail_tol());
      CHECK(row->mass <= 1.0 + 1e-12);
      double mean = 0.0, ex2 = 0.0;
      for (i64 b = row->lo; b <= row->hi(); ++b) {
        mean += static_cast<double>(b) * row->pmf_at(b);
        ex2 += static_cast<double>(b) * static_cast<double>(b) * row->pmf_at(b);
      }
      ConditionalMoments cm = conditional_moments(spec, a);
      double scale_m = std::max(1.0, std::abs(cm.mean));
      double scale_v = std::max(1.0, cm.variance);
      CHECK(std::abs(mean - cm.mean) / scale_m < 1e-8);
      CHECK(std::abs((ex2 - mean * mean) - cm.variance) / scale_v < 1e-8);
    }
  }
}

TEST_CASE("one-step sampling histogram matches transition pmf", "[slow]") {
  std::vector<ProcessSpec> specs;
  specs.push_back(ProcessSpec{bh_spec(100)});
  specs.push_back(ProcessSpec{PsdbpSpec{std::make_shared<PoissonScaledFamily>(Rational(3))}});
  specs.push_back(ProcessSpec{ex415_psdbp(25)});
  specs.push_back(ProcessSpec{ex415_cbp(25)});
  specs.push_back(ProcessSpec{PsdbpSpec{std::make_shared<ThreePointMatchedFamily>()}});
  specs.push_back(ProcessSpec{CbpSpec{DeterministicControl{ControlMap::max_shift(1)},
                                      Distribution::binomial(2, Rational(1, 2))}});
  const i64 a = 10;
  const i64 n = 1000000;
  int spec_idx = 0;
  for (const auto& spec : specs) {
    TransitionKernel kernel{spec};
    RngStream s = RngStream::derive(999, {static_cast<u64>(spec_idx++)});
    std::map<i64, i64> counts;
    for (i64 i = 0; i < n; ++i) ++counts[detail_kernel::simulate_step(spec, a, s)];
    auto row = kernel.row(a);
    for (i64 b = row->lo; b <= row->hi(); ++b) {
      double p = row->pmf_at(b);
      double expect = static_cast<double>(n) * p;
      if (expect < 1e-3) continue;
      double got = counts.count(b) ? static_cast<double>(counts[b]) : 0.0;
      double sd = std::sqrt(std::max(1.0, expect * (1.0 - p)));
      INFO("spec " << spec_idx << " b=" << b);
      CHECK(std::abs(got - expect) <= 5.5 * sd);
    }
  }
}

TEST_CASE("simulate: constant offspring gives a constant trajectory") {
  PsdbpSpec unit{std::make_shared<ConstantOffspringFamily>(Distribution::point_mass(1))};
  TrajectoryTable t = simulate(ProcessSpec{unit}, 7, 25, 2, 42);
  for (const auto& path : t.sizes)
    for (i64 size : path) CHECK(size == 7);
}

TEST_CASE("simulate: Beverton-Holt trajectories settle near the carrying capacity", "[slow]") {
  TrajectoryTable t = simulate(ProcessSpec{bh_spec(100)}, 10, 1000, 10, 2718);
  double sum = 0.0;
  i64 count = 0;
  for (const auto& path : t.sizes)
    for (std::size_t g = 200; g < path.size(); ++g) {
      sum += static_cast<double>(path[g]);
      ++count;
    }
  double avg = sum / static_cast<double>(count);
  CHECK(avg > 90.0);
  CHECK(avg < 110.0);
}

TEST_CASE("simulate: immigration at zero revives extinct paths") {
  CbpSpec fig2{ScaledBernoulliControl{ControlMap::affine_floor(Rational(1), Rational(1)),
                                      RateRef::exp_gate(1000)},
               Distribution::binomial(5, Rational(1, 5))};
  TrajectoryTable t = simulate(ProcessSpec{fig2}, 1, 300, 5, 7);
  bool revived = false;
  for (const auto& path : t.sizes) {
    bool seen_zero = false;
    for (i64 size : path) {
      if (size == 0) seen_zero = true;
      if (seen_zero && size > 0) revived = true;
    }
  }
  CHECK(revived);
}

TEST_CASE("simulate determinism across worker counts") {
  ParallelOptions one{1}, four{4};
  TrajectoryTable a = simulate(ProcessSpec{bh_spec(100)}, 10, 100, 6, 5, one);
  TrajectoryTable b = simulate(ProcessSpec{bh_spec(100)}, 10, 100, 6, 5, four);
  CHECK(a.sizes == b.sizes);
}

TEST_CASE("attainable sets") {
  // doubling point-mass chain truncates at the cap
  CbpSpec doubling{DeterministicControl{ControlMap::identity()}, Distribution::point_mass(2)};
  AttainableSet att = attainable_set(ProcessSpec{doubling}, 1, 20);
  CHECK(att.states == std::vector<i64>{1, 2, 4, 8, 16});
  CHECK(att.truncated);

  // parity-half control with binomial offspring: from z0 = 1 at most one
  // parent ever reproduces, so {0,1,2} is closed; from z0 = 4 the odd states
  // reproduce at full strength and every state is reached
  CbpSpec parity{DeterministicControl{ControlMap::parity_half()},
                 Distribution::binomial(2, Rational(1, 2))};
  AttainableSet att2a = attainable_set(ProcessSpec{parity}, 1, 40);
  CHECK(att2a.states == std::vector<i64>{0, 1, 2});
  AttainableSet att2 = attainable_set(ProcessSpec{parity}, 4, 40);
  CHECK(att2.all_of_range);
  CHECK(att2.states.size() == 41);

  // zero in the offspring support at z0 puts zero in the attainable set
  AttainableSet att3 = attainable_set(ProcessSpec{bh_spec(100)}, 3, 30);
  CHECK(att3.states.front() == 0);

  // unbounded offspring support: symbolic all-of-range
  PsdbpSpec scaled{std::make_shared<PoissonScaledFamily>(Rational(3))};
  AttainableSet att4 = attainable_set(ProcessSpec{scaled}, 2, 50);
  CHECK(att4.all_of_range);
  CHECK(att4.truncated);

  CHECK_THROWS_AS(attainable_set(ProcessSpec{bh_spec(100)}, 10, 5), ValidationError);
}

TEST_CASE("carrying capacity audits") {
  CarryingCapacityReport r1 = carrying_capacity_audit(ProcessSpec{bh_spec(100)}, 100, 1, 500);
  CHECK(r1.ok());

  CarryingCapacityReport r2 = carrying_capacity_audit(ProcessSpec{ex415_psdbp(100)}, 100, 1, 500);
  CHECK(r2.ok());
  CarryingCapacityReport r3 = carrying_capacity_audit(ProcessSpec{ex415_cbp(100)}, 100, 1, 500);
  CHECK(r3.ok());

  // critical Galton-Watson: no drift anywhere
  PsdbpSpec critical{std::make_shared<ConstantOffspringFamily>(Distribution::poisson(Rational(1)))};
  CarryingCapacityReport r4 = carrying_capacity_audit(ProcessSpec{critical}, 100, 1, 300);
  CHECK_FALSE(r4.ok());
  CHECK(r4.nowhere_drift());
  CHECK(r4.zero_drift_states == static_cast<i64>(r4.violations.size()));
}

TEST_CASE("equivalent pair kernels are pointwise equal") {
  PsdbpSpec psdbp{std::make_shared<PoissonScaledFamily>(Rational(3))};
  CbpSpec dcbp{DeterministicControl{ControlMap::max_shift(1)}, Distribution::poisson(Rational(3))};
  TransitionKernel a{ProcessSpec{psdbp}}, b{ProcessSpec{dcbp}};
  for (i64 z = 0; z <= 40; ++z) {
    auto ra = a.row(z);
    auto rb = b.row(z);
    i64 lo = std::min(ra->lo, rb->lo), hi = std::max(ra->hi(), rb->hi());
    for (i64 v = lo; v <= hi; ++v) CHECK(std::abs(ra->pmf_at(v) - rb->pmf_at(v)) <= 1e-12);
  }
}

TEST_CASE("kernel cache is advisory") {
  TransitionKernel cached{ProcessSpec{ex415_cbp(25)}};
  TransitionKernel uncached{ProcessSpec{ex415_cbp(25)}};
  uncached.set_cache_enabled(false);
  for (i64 a : {1, 5, 25}) {
    auto r1 = cached.row(a);
    auto r2 = uncached.row(a);
    REQUIRE(r1->lo == r2->lo);
    REQUIRE(r1->pmf.size() == r2->pmf.size());
    for (std::size_t i = 0; i < r1->pmf.size(); ++i) CHECK(r1->pmf[i] == r2->pmf[i]);
  }
}
