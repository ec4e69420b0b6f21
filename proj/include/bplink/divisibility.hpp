#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/distribution.hpp"

namespace bplink {

enum class Divisibility { divisible, not_divisible, unknown };

// Verdict on whether a law is the sum of n iid copies of some law on N0.
// `component` is set when a closed-form component exists; a divisible verdict
// without a component means divisibility is known only non-constructively.
struct DivisibilityVerdict {
  Divisibility outcome = Divisibility::unknown;
  std::optional<Distribution> component;
  std::string rule;

  bool divisible() const { return outcome == Divisibility::divisible; }
  bool component_available() const { return component.has_value(); }

  static DivisibilityVerdict yes(Distribution c, std::string rule_id) {
    return {Divisibility::divisible, std::move(c), std::move(rule_id)};
  }
  static DivisibilityVerdict yes_no_component(std::string rule_id) {
    return {Divisibility::divisible, std::nullopt, std::move(rule_id)};
  }
  static DivisibilityVerdict no(std::string rule_id) {
    return {Divisibility::not_divisible, std::nullopt, std::move(rule_id)};
  }
  static DivisibilityVerdict dont_know(std::string rule_id) {
    return {Divisibility::unknown, std::nullopt, std::move(rule_id)};
  }
};

inline bool approx_same_distribution(const Distribution& a, const Distribution& b,
                                     double tol = 1e-12) {
  if (a.value().index() != b.value().index()) return false;
  auto close = [tol](double x, double y) { return std::abs(x - y) <= tol; };
  if (const auto* x = a.get_if<Distribution::PointMass>())
    return x->c == b.get_if<Distribution::PointMass>()->c;
  if (const auto* x = a.get_if<Distribution::Bernoulli>())
    return close(x->p, b.get_if<Distribution::Bernoulli>()->p);
  if (const auto* x = a.get_if<Distribution::Binomial>()) {
    const auto* y = b.get_if<Distribution::Binomial>();
    return x->n == y->n && close(x->p, y->p);
  }
  if (const auto* x = a.get_if<Distribution::Poisson>())
    return close(x->mu, b.get_if<Distribution::Poisson>()->mu);
  if (const auto* x = a.get_if<Distribution::Geometric>())
    return close(x->q, b.get_if<Distribution::Geometric>()->q);
  if (const auto* x = a.get_if<Distribution::NegativeBinomial>()) {
    const auto* y = b.get_if<Distribution::NegativeBinomial>();
    return close(x->r, y->r) && close(x->q, y->q);
  }
  if (const auto* x = a.get_if<Distribution::ZeroInflatedPoisson>()) {
    const auto* y = b.get_if<Distribution::ZeroInflatedPoisson>();
    return close(x->pi0, y->pi0) && close(x->lambda, y->lambda);
  }
  if (const auto* x = a.get_if<Distribution::ZeroInflatedGeometric>()) {
    const auto* y = b.get_if<Distribution::ZeroInflatedGeometric>();
    return close(x->p, y->p) && close(x->q, y->q);
  }
  if (const auto* x = a.get_if<Distribution::ScaledBernoulli>()) {
    const auto* y = b.get_if<Distribution::ScaledBernoulli>();
    return x->s == y->s && close(x->p, y->p);
  }
  if (const auto* x = a.get_if<Distribution::FiniteSupport>()) {
    const auto* y = b.get_if<Distribution::FiniteSupport>();
    if (x->values != y->values) return false;
    for (std::size_t i = 0; i < x->probs.size(); ++i)
      if (!close(x->probs[i], y->probs[i])) return false;
    return true;
  }
  return false;
}

// Registered special cases extending the rule catalog, for laws whose
// divisibility was established elsewhere (e.g. brute force on a small
// support). Consulted before returning an unknown verdict.
class DivisibilityRegistry {
public:
  void add(Distribution target, i64 n, DivisibilityVerdict verdict) {
    entries_.push_back({std::move(target), n, std::move(verdict)});
  }

  const DivisibilityVerdict* find(const Distribution& d, i64 n) const {
    for (const auto& e : entries_)
      if (e.n == n && approx_same_distribution(e.target, d)) return &e.verdict;
    return nullptr;
  }

private:
  struct Entry {
    Distribution target;
    i64 n;
    DivisibilityVerdict verdict;
  };
  std::vector<Entry> entries_;
};

inline bool is_nondegenerate_bernoulli(const Distribution& d) {
  const auto* x = d.get_if<Distribution::Bernoulli>();
  return x != nullptr && x->p > 0.0 && x->p < 1.0;
}

// n-divisibility with constructive division where a rule gives one.
// Families outside the rule catalog return an unknown verdict rather than
// attempting generating-function analysis.
inline DivisibilityVerdict divide(const Distribution& d, i64 n,
                                  const DivisibilityRegistry* registry = nullptr) {
  if (n < 1) throw ValidationError("divide: n must be >= 1");
  if (n == 1) return DivisibilityVerdict::yes(d, "identity");

  if (const auto* x = d.get_if<Distribution::Poisson>()) {
    if (x->mu_exact) {
      try {
        return DivisibilityVerdict::yes(Distribution::poisson(*x->mu_exact / Rational(n)),
                                        "poisson-additivity");
      } catch (const RationalOverflowError&) {
      }
    }
    return DivisibilityVerdict::yes(Distribution::poisson(x->mu / static_cast<double>(n)),
                                    "poisson-additivity");
  }
  if (const auto* x = d.get_if<Distribution::NegativeBinomial>()) {
    if (x->r_exact && x->q_exact) {
      try {
        return DivisibilityVerdict::yes(
            Distribution::negative_binomial(*x->r_exact / Rational(n), *x->q_exact),
            "nb-shape-split");
      } catch (const RationalOverflowError&) {
      }
    }
    return DivisibilityVerdict::yes(
        Distribution::negative_binomial(x->r / static_cast<double>(n), x->q), "nb-shape-split");
  }
  if (const auto* x = d.get_if<Distribution::Geometric>()) {
    if (x->q_exact)
      return DivisibilityVerdict::yes(Distribution::negative_binomial(Rational(1, n), *x->q_exact),
                                      "geometric-as-nb");
    return DivisibilityVerdict::yes(
        Distribution::negative_binomial(1.0 / static_cast<double>(n), x->q), "geometric-as-nb");
  }
  if (const auto* x = d.get_if<Distribution::Binomial>()) {
    if (x->n % n != 0) return DivisibilityVerdict::no("binomial-trial-count");
    i64 nn = x->n / n;
    Distribution comp = nn == 1 ? (x->p_exact ? Distribution::bernoulli(*x->p_exact)
                                              : Distribution::bernoulli(x->p))
                                : (x->p_exact ? Distribution::binomial(nn, *x->p_exact)
                                              : Distribution::binomial(nn, x->p));
    return DivisibilityVerdict::yes(std::move(comp), "binomial-trial-count");
  }
  if (is_nondegenerate_bernoulli(d))
    return DivisibilityVerdict::no("bounded-two-point");
  if (const auto* x = d.get_if<Distribution::Bernoulli>()) {
    // p in {0,1} degenerates to a point mass.
    i64 c = x->p >= 1.0 ? 1 : 0;
    if (c % n == 0)
      return DivisibilityVerdict::yes(Distribution::point_mass(c / n), "pointmass-factor");
    return DivisibilityVerdict::no("pointmass-factor");
  }
  if (const auto* x = d.get_if<Distribution::PointMass>()) {
    if (x->c % n == 0)
      return DivisibilityVerdict::yes(Distribution::point_mass(x->c / n), "pointmass-factor");
    return DivisibilityVerdict::no("pointmass-factor");
  }
  if (d.get_if<Distribution::ZeroInflatedGeometric>()) {
    // Infinitely divisible by log-convexity of the pmf ratio sequence, but the
    // components have no known closed form.
    return DivisibilityVerdict::yes_no_component("zig-infinitely-divisible");
  }
  if (registry != nullptr) {
    if (const DivisibilityVerdict* v = registry->find(d, n)) return *v;
  }
  return DivisibilityVerdict::dont_know("outside-rule-catalog");
}

// Families infinitely divisible by the rule catalog (so y-divisible for
// every y >= 1 without enumerating y).
inline bool infinitely_divisible(const Distribution& d) {
  if (d.get_if<Distribution::Poisson>() || d.get_if<Distribution::Geometric>() ||
      d.get_if<Distribution::NegativeBinomial>() ||
      d.get_if<Distribution::ZeroInflatedGeometric>())
    return true;
  if (const auto* x = d.get_if<Distribution::PointMass>()) return x->c == 0;
  return false;
}

// gamma(d) = max_{n >= 1} min(pmf(n), pmf(n-1)): the largest mass shared by
// two consecutive atoms. Always <= 1/2.
inline double consecutive_overlap(const Distribution& d, double tail_tol = kDefaultTailTol) {
  SupportWindow w = d.truncated_support(tail_tol);
  double best = 0.0;
  i64 start = std::max<i64>(w.lo, 1);
  double prev = d.pmf(start - 1);
  for (i64 n = start; n <= w.hi + 1; ++n) {
    double cur = d.pmf(n);
    best = std::max(best, std::min(prev, cur));
    prev = cur;
  }
  return best;
}

}  // namespace bplink
