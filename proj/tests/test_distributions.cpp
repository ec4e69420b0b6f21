#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "bplink/convolution.hpp"
#include "bplink/distribution.hpp"
#include "bplink/divisibility.hpp"
#include "bplink/grammar.hpp"
#include "test_support.hpp"

using namespace bplink;
using bplink_test::TestRng;

namespace {

// Draws one random parameterization per family.
Distribution random_law(i64 family, TestRng& rng) {
  switch (family) {
    case 0: return Distribution::point_mass(rng.uniform_int(0, 9));
    case 1: return Distribution::bernoulli(rng.uniform(0.05, 0.95));
    case 2: return Distribution::binomial(rng.uniform_int(1, 12), rng.uniform(0.05, 0.95));
    case 3: return Distribution::poisson(rng.uniform(0.1, 8.0));
    case 4: return Distribution::geometric(rng.uniform(0.1, 0.9));
    case 5: return Distribution::negative_binomial(rng.uniform(0.3, 5.0), rng.uniform(0.15, 0.85));
    case 6: return Distribution::zero_inflated_poisson(rng.uniform(0.0, 0.9), rng.uniform(0.2, 6.0));
    case 7: return Distribution::zero_inflated_geometric(rng.uniform(0.05, 0.9), rng.uniform(0.2, 0.8));
    case 8: return Distribution::scaled_bernoulli(rng.uniform_int(1, 6), rng.uniform(0.05, 0.95));
    default: {
      i64 n = rng.uniform_int(2, 5);
      std::vector<i64> values;
      std::vector<double> probs;
      double left = 1.0;
      i64 v = rng.uniform_int(0, 2);
      for (i64 i = 0; i < n; ++i) {
        values.push_back(v);
        v += rng.uniform_int(1, 3);
        double p = i + 1 == n ? left : left * rng.uniform(0.1, 0.7);
        probs.push_back(p);
        left -= p;
      }
      return Distribution::finite_support(std::move(values), std::move(probs));
    }
  }
}

}  // namespace

TEST_CASE("pmf closed forms") {
  CHECK(Distribution::poisson(Rational(2)).pmf(0) == Catch::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(Distribution::zero_inflated_geometric(Rational(3, 10), Rational(1, 2)).pmf(0) ==
        Catch::Approx(0.65).margin(1e-15));
  CHECK(Distribution::finite_support({0, 2}, std::vector<Rational>{Rational(1, 4), Rational(3, 4)})
            .pmf(1) == 0.0);
  // zig pmf for k >= 1: (1-p)(1-q)^k q
  auto zig = Distribution::zero_inflated_geometric(0.3, 0.5);
  CHECK(zig.pmf(2) == Catch::Approx(0.7 * 0.25 * 0.5).epsilon(1e-12));
}

TEST_CASE("constructors reject out-of-range parameters") {
  CHECK_THROWS_AS(Distribution::bernoulli(1.5), ValidationError);
  CHECK_THROWS_AS(Distribution::geometric(0.0), ValidationError);
  CHECK_THROWS_AS(Distribution::geometric(1.0), ValidationError);
  CHECK_THROWS_AS(Distribution::negative_binomial(-1.0, 0.5), ValidationError);
  CHECK_THROWS_AS(Distribution::binomial(0, 0.5), ValidationError);
  CHECK_THROWS_AS(Distribution::finite_support({0, 1}, std::vector<double>{0.5, 0.6}),
                  ValidationError);
  CHECK_THROWS_AS(Distribution::finite_support({1, 0}, std::vector<double>{0.5, 0.5}),
                  ValidationError);
  CHECK_THROWS_AS(Distribution::point_mass(-1), ValidationError);
}

TEST_CASE("moments examples") {
  Moments m = Distribution::poisson(Rational(3)).moments(1e-9);
  CHECK(m.mean == 3.0);
  CHECK(m.variance == 3.0);

  // zero-inflated Poisson matched to unit mean: pi0 = 1 - 1/lambda
  auto zip = Distribution::zero_inflated_poisson(Rational(2, 3), Rational(3));
  CHECK(*zip.mean_exact() == Rational(1));
  CHECK(*zip.variance_exact() == Rational(3));

  // NB offspring of the carrying-capacity family at z = K: mean from the
  // control-side conditional mean divided by z
  const Rational lambda(3), K(100);
  const i64 M = 2, z = 100;
  Rational psi(z + M);
  Rational q_ctrl = Rational(2) * K * K / (lambda * (K + Rational(M)) * (Rational(z) + K));
  Rational want = psi * q_ctrl * lambda / Rational(z);
  auto fam = NbCarryingCapacityFamily(lambda, M, K);
  CHECK(*fam.offspring(z).mean_exact() == want);
  CHECK(want == Rational(2) * K * K * Rational(z + M) /
                    (Rational(z) * (K + Rational(M)) * (Rational(z) + K)));
}

TEST_CASE("moments tail tolerance validation") {
  CHECK_THROWS_AS(Distribution::poisson(1.0).moments(1e-3), ValidationError);
  Moments m = Distribution::poisson(1.0).moments(1e-9);
  CHECK(m.rho3_truncated);
  Moments f = Distribution::bernoulli(0.5).moments(1e-9);
  CHECK_FALSE(f.rho3_truncated);
  CHECK(f.rho3 == Catch::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("sampling determinism and point mass") {
  auto pm = Distribution::point_mass(5);
  RngStream s1 = RngStream::derive(1, {9});
  for (int i = 0; i < 10; ++i) CHECK(pm.sample(s1) == 5);

  auto bin = Distribution::binomial(7, 0.3);
  RngStream a = RngStream::derive(3, {4});
  RngStream b = RngStream::derive(3, {4});
  for (int i = 0; i < 200; ++i) CHECK(bin.sample(a) == bin.sample(b));
}

TEST_CASE("sample mean of Binomial(2, 1/2) within 4 standard errors") {
  auto d = Distribution::binomial(2, 0.5);
  RngStream s = RngStream::derive(11, {1});
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(d.sample(s));
  double se = std::sqrt(0.5 / n);
  CHECK(std::abs(sum / n - 1.0) < 4.0 * se);
}

TEST_CASE("sampling matches pmf per family", "[slow]") {
  TestRng rng(2024);
  for (i64 family = 0; family < 10; ++family) {
    Distribution d = random_law(family, rng);
    RngStream s = RngStream::derive(55, {static_cast<u64>(family)});
    const i64 n = 200000;
    std::map<i64, i64> counts;
    for (i64 i = 0; i < n; ++i) ++counts[d.sample(s)];
    SupportWindow w = d.truncated_support(1e-9);
    for (i64 k = w.lo; k <= w.hi; ++k) {
      double expect = static_cast<double>(n) * d.pmf(k);
      double sd = std::sqrt(std::max(1.0, expect * (1.0 - d.pmf(k))));
      double got = static_cast<double>(counts.count(k) ? counts[k] : 0);
      INFO("family " << d.family_name() << " k=" << k);
      CHECK(std::abs(got - expect) <= 6.0 * sd);
    }
  }
}

TEST_CASE("iid_sum closed forms and edge cases") {
  auto sum2 = iid_sum(Distribution::bernoulli(Rational(1, 2)), 2);
  const auto* bin = sum2.get_if<Distribution::Binomial>();
  REQUIRE(bin != nullptr);
  CHECK(bin->n == 2);
  CHECK(bin->p == 0.5);

  auto zero = iid_sum(Distribution::poisson(3.0), 0);
  CHECK(zero.get_if<Distribution::PointMass>()->c == 0);

  // three iid fair coins: enumerate the 2^3 outcomes
  auto half = Distribution::finite_support({0, 1}, std::vector<Rational>{Rational(1, 2), Rational(1, 2)});
  auto sum3 = iid_sum(half, 3);
  std::vector<double> expect{1.0 / 8, 3.0 / 8, 3.0 / 8, 1.0 / 8};
  for (i64 k = 0; k <= 3; ++k) CHECK(sum3.pmf(k) == Catch::Approx(expect[std::size_t(k)]).margin(1e-12));

  // closed scalings
  CHECK(iid_sum(Distribution::poisson(Rational(3)), 4).get_if<Distribution::Poisson>()->mu == 12.0);
  CHECK(iid_sum(Distribution::geometric(Rational(1, 2)), 3).get_if<Distribution::NegativeBinomial>()->r ==
        3.0);
  CHECK(iid_sum(Distribution::negative_binomial(Rational(3, 2), Rational(1, 3)), 2)
            .get_if<Distribution::NegativeBinomial>()
            ->r == 3.0);
  CHECK(iid_sum(Distribution::binomial(3, 0.25), 4).get_if<Distribution::Binomial>()->n == 12);
  CHECK(iid_sum(Distribution::point_mass(5), 3).get_if<Distribution::PointMass>()->c == 15);
}

TEST_CASE("closed-form convolution agrees with the generic path") {
  TestRng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    Distribution d = rep % 3 == 0
                         ? Distribution::binomial(rng.uniform_int(1, 6), rng.uniform(0.2, 0.8))
                         : rep % 3 == 1 ? Distribution::poisson(rng.uniform(0.3, 4.0))
                                        : Distribution::negative_binomial(rng.uniform(0.5, 3.0),
                                                                          rng.uniform(0.25, 0.75));
    i64 m = rng.uniform_int(2, 6);
    Distribution closed = iid_sum(d, m);
    // generic route: freeze the law into explicit finite support, then convolve
    SupportWindow w = d.truncated_support(1e-14);
    std::vector<i64> values;
    std::vector<double> probs;
    for (i64 k = w.lo; k <= w.hi; ++k) {
      values.push_back(k);
      probs.push_back(d.pmf(k));
    }
    Distribution generic = iid_sum(
        Distribution::finite_support_truncated(std::move(values), std::move(probs), 1e-12), m);
    SupportWindow cw = closed.truncated_support(1e-12);
    for (i64 k = cw.lo; k <= cw.hi; ++k)
      CHECK(std::abs(closed.pmf(k) - generic.pmf(k)) < 1e-12);
  }
}

TEST_CASE("iid_sum of zero-inflated families uses the compound structure") {
  auto zip = Distribution::zero_inflated_poisson(Rational(2, 3), Rational(3));
  auto s = iid_sum(zip, 12);
  CHECK(s.mean() == Catch::Approx(12.0).epsilon(1e-9));
  CHECK(s.variance() == Catch::Approx(36.0).epsilon(1e-8));
  double total = 0.0;
  SupportWindow w = s.truncated_support(1e-11);
  for (i64 k = w.lo; k <= w.hi; ++k) total += s.pmf(k);
  CHECK(total == Catch::Approx(1.0).margin(1e-10));

  auto zig = Distribution::zero_inflated_geometric(0.4, 0.5);
  auto s2 = iid_sum(zig, 5);
  CHECK(s2.mean() == Catch::Approx(5.0 * zig.mean()).epsilon(1e-9));
}

TEST_CASE("divide rule catalog") {
  auto v = divide(Distribution::binomial(2, Rational(1, 2)), 2);
  REQUIRE(v.divisible());
  REQUIRE(v.component.has_value());
  CHECK(v.component->get_if<Distribution::Bernoulli>() != nullptr);
  CHECK(v.component->pmf(1) == 0.5);

  auto p = divide(Distribution::poisson(Rational(7)), 5);
  REQUIRE(p.divisible());
  CHECK(*p.component->get_if<Distribution::Poisson>()->mu_exact == Rational(7, 5));

  CHECK(divide(Distribution::bernoulli(0.5), 2).outcome == Divisibility::not_divisible);
  CHECK(divide(Distribution::binomial(3, 0.5), 2).outcome == Divisibility::not_divisible);

  auto g = divide(Distribution::geometric(Rational(1, 3)), 4);
  REQUIRE(g.divisible());
  CHECK(*g.component->get_if<Distribution::NegativeBinomial>()->r_exact == Rational(1, 4));

  CHECK(divide(Distribution::point_mass(6), 3).component->get_if<Distribution::PointMass>()->c == 2);
  CHECK(divide(Distribution::point_mass(5), 3).outcome == Divisibility::not_divisible);

  auto zig = divide(Distribution::zero_inflated_geometric(0.3, 0.5), 7);
  CHECK(zig.outcome == Divisibility::divisible);
  CHECK_FALSE(zig.component_available());
  CHECK(zig.rule == "zig-infinitely-divisible");

  CHECK(divide(Distribution::zero_inflated_poisson(0.5, 2.0), 2).outcome == Divisibility::unknown);
  CHECK(divide(Distribution::scaled_bernoulli(3, 0.5), 2).outcome == Divisibility::unknown);
  CHECK(divide(Distribution::finite_support({0, 1, 2}, std::vector<double>{0.25, 0.5, 0.25}), 2)
            .outcome == Divisibility::unknown);

  // n = 1 is the identity split
  CHECK(divide(Distribution::scaled_bernoulli(3, 0.5), 1).divisible());
}

TEST_CASE("divide consults the registry for special cases") {
  DivisibilityRegistry registry;
  auto target = Distribution::finite_support({0, 1, 2}, std::vector<double>{0.25, 0.5, 0.25});
  registry.add(target, 2,
               DivisibilityVerdict::yes(Distribution::bernoulli(0.5), "registered-case"));
  auto v = divide(target, 2, &registry);
  REQUIRE(v.divisible());
  CHECK(v.rule == "registered-case");
  // unrelated n still unknown
  CHECK(divide(target, 3, &registry).outcome == Divisibility::unknown);
}

TEST_CASE("division round-trip: component summed n times reproduces the law") {
  TestRng rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    Distribution d = rep % 4 == 0 ? Distribution::poisson(Rational(rng.uniform_int(1, 9), 2))
                     : rep % 4 == 1
                         ? Distribution::negative_binomial(Rational(rng.uniform_int(1, 8), 2),
                                                           Rational(rng.uniform_int(1, 3), 4))
                     : rep % 4 == 2 ? Distribution::geometric(Rational(rng.uniform_int(1, 3), 4))
                                    : Distribution::binomial(4 * rng.uniform_int(1, 3),
                                                             Rational(rng.uniform_int(1, 3), 4));
    i64 n = rng.uniform_int(2, 4);
    if (d.get_if<Distribution::Binomial>() != nullptr) n = 2;
    DivisibilityVerdict v = divide(d, n);
    REQUIRE(v.divisible());
    REQUIRE(v.component.has_value());
    Distribution back = iid_sum(*v.component, n);
    SupportWindow w = d.truncated_support(1e-12);
    for (i64 k = w.lo; k <= std::min<i64>(w.hi, 200); ++k) {
      INFO("family " << d.family_name() << " n=" << n << " k=" << k);
      CHECK(std::abs(back.pmf(k) - d.pmf(k)) < 1e-12);
    }
  }
}

TEST_CASE("consecutive overlap") {
  CHECK(consecutive_overlap(Distribution::bernoulli(Rational(1, 2))) == 0.5);
  CHECK(consecutive_overlap(Distribution::point_mass(4)) == 0.0);
  // enumeration oracle over 0..50
  auto poi = Distribution::poisson(Rational(1));
  double best = 0.0;
  for (i64 n = 1; n <= 50; ++n) best = std::max(best, std::min(poi.pmf(n), poi.pmf(n - 1)));
  CHECK(consecutive_overlap(poi) == Catch::Approx(best).epsilon(1e-12));
  CHECK(best == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("property: normalization and moment consistency across families") {
  TestRng rng(31337);
  for (int rep = 0; rep < 100; ++rep) {
    Distribution d = random_law(rep % 10, rng);
    SupportWindow w = d.truncated_support(1e-12);
    double sum = 0.0, mean = 0.0, ex2 = 0.0;
    for (i64 k = w.lo; k <= w.hi; ++k) {
      double p = d.pmf(k);
      sum += p;
      mean += static_cast<double>(k) * p;
      ex2 += static_cast<double>(k) * static_cast<double>(k) * p;
    }
    INFO("family " << d.family_name());
    CHECK(std::abs(sum - 1.0) < 1e-10);
    double var = ex2 - mean * mean;
    double scale_m = std::max(1.0, std::abs(d.mean()));
    double scale_v = std::max(1.0, d.variance());
    CHECK(std::abs(mean - d.mean()) / scale_m < 1e-9);
    CHECK(std::abs(var - d.variance()) / scale_v < 1e-7);
    CHECK(consecutive_overlap(d) <= 0.5);
  }
}

TEST_CASE("grammar round-trips distributions") {
  TestRng rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    Distribution d = random_law(rep % 10, rng);
    Distribution back = parse_distribution(format_distribution(d));
    CHECK(approx_same_distribution(d, back, 1e-12));
  }
  // exact forms survive
  auto nb = Distribution::negative_binomial(Rational(51, 100), Rational(1, 3));
  auto back = parse_distribution(format_distribution(nb));
  CHECK(*back.get_if<Distribution::NegativeBinomial>()->r_exact == Rational(51, 100));
  CHECK_THROWS_AS(parse_distribution("waffles(x=1)"), ParseError);
  CHECK_THROWS_AS(parse_distribution("poisson(mu=)"), ParseError);
}
