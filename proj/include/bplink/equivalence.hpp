#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bplink/convolution.hpp"
#include "bplink/divisibility.hpp"
#include "bplink/kernel.hpp"
#include "bplink/process.hpp"

namespace bplink {

// ---------------------------------------------------------------------------
// Control-function divisibility: phi(0) = 0 almost surely and phi(z)
// z-divisible at every attainable z >= 1.

struct ControlDivisibilityResult {
  Divisibility outcome = Divisibility::unknown;
  std::optional<i64> witness;  // state where divisibility fails / is unknown
  bool truncated = false;      // conclusion limited to the audited range
  bool constructive = false;   // closed-form components exist at audited states
  std::string rule;
};

inline ControlDivisibilityResult control_divisibility(const CbpSpec& cbp, i64 z0, i64 cap,
                                                      const DivisibilityRegistry* registry =
                                                          nullptr) {
  ControlDivisibilityResult out;
  if (allows_immigration_at_zero(cbp.control)) {
    out.outcome = Divisibility::not_divisible;
    out.witness = 0;
    out.rule = "immigration-at-zero";
    return out;
  }
  // Poisson and negative-binomial control laws are infinitely divisible, so
  // the conclusion covers every attainable state.
  if (std::holds_alternative<PoissonControl>(cbp.control)) {
    out.outcome = Divisibility::divisible;
    out.constructive = true;
    out.rule = "poisson-control-infinitely-divisible";
    return out;
  }
  if (std::holds_alternative<NegBinControl>(cbp.control)) {
    out.outcome = Divisibility::divisible;
    out.constructive = true;
    out.rule = "negbin-control-infinitely-divisible";
    return out;
  }
  if (const auto* b = std::get_if<BinomialControl>(&cbp.control)) {
    if (b->psi.analytic_multiple_of_argument().value_or(false)) {
      out.outcome = Divisibility::divisible;
      out.constructive = true;
      out.rule = "binomial-control-multiple-trials";
      return out;
    }
  }
  if (const auto* d = std::get_if<DeterministicControl>(&cbp.control)) {
    if (d->map.analytic_multiple_of_argument().value_or(false)) {
      out.outcome = Divisibility::divisible;
      out.constructive = true;
      out.rule = "deterministic-control-multiple";
      return out;
    }
  }
  AttainableSet att = attainable_set(ProcessSpec{cbp}, z0, cap);
  out.truncated = att.truncated;
  out.constructive = true;
  std::optional<i64> first_unknown;
  for (i64 z : att.states) {
    if (z == 0) continue;
    DivisibilityVerdict v = divide(control_law(cbp.control, z), z, registry);
    if (v.outcome == Divisibility::not_divisible) {
      out.outcome = Divisibility::not_divisible;
      out.witness = z;
      out.constructive = false;
      out.rule = v.rule;
      return out;
    }
    if (v.outcome == Divisibility::unknown && !first_unknown) {
      first_unknown = z;
      out.rule = v.rule;
    }
    if (!v.component) out.constructive = false;
  }
  if (first_unknown) {
    out.outcome = Divisibility::unknown;
    out.witness = first_unknown;
    return out;
  }
  out.outcome = Divisibility::divisible;
  out.rule = out.rule.empty() ? "per-state-divisible" : out.rule;
  return out;
}

// ---------------------------------------------------------------------------
// The set Y of divisors the offspring law must admit for a DCBP:
// { z / gcd(phi(z), z) : z attainable, z != 0 }, with gcd(0, z) = z.

struct YSet {
  std::vector<i64> values;
  bool truncated = false;
};

inline YSet y_set(const CbpSpec& dcbp, i64 z0, i64 cap) {
  const auto* det = std::get_if<DeterministicControl>(&dcbp.control);
  if (det == nullptr) throw ValidationError("y_set: control must be deterministic");
  AttainableSet att = attainable_set(ProcessSpec{dcbp}, z0, cap);
  YSet out;
  out.truncated = att.truncated;
  std::vector<i64> ys;
  for (i64 z : att.states) {
    if (z == 0) continue;
    i64 g = std::gcd(det->map(z), z);
    ys.push_back(z / g);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  out.values = std::move(ys);
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence decision.

enum class EqOutcome { yes, no, unknown };

struct EquivalenceVerdict {
  EqOutcome outcome = EqOutcome::unknown;
  std::string rule;
  std::string reason;
  std::optional<i64> witness;
  bool construction_available = false;
  std::optional<PsdbpSpec> construction;
  bool attainable_truncated = false;
  // Yes verdicts whose quantifier ranged only over the truncated attainable
  // set are flagged; No verdicts always carry an in-range witness.
  bool audited_range_only = false;
};

namespace detail_eq {

// Smallest attainable z >= 1 whose y-value equals y_fail (for witness
// reporting when the offspring is not y-divisible).
inline std::optional<i64> state_for_y(const CbpSpec& dcbp, i64 z0, i64 cap, i64 y_fail) {
  const auto& det = std::get<DeterministicControl>(dcbp.control);
  AttainableSet att = attainable_set(ProcessSpec{dcbp}, z0, cap);
  for (i64 z : att.states) {
    if (z == 0) continue;
    if (z / std::gcd(det.map(z), z) == y_fail) return z;
  }
  return std::nullopt;
}

// Offspring rule of the equivalent PSDBP for a Z-divisible DCBP:
// xi(z) = sum of x = phi(z)/gcd copies of the y-component of the offspring,
// where y = z/gcd(phi(z), z).
inline Distribution dcbp_division_offspring(const ControlMap& phi, const Distribution& xi, i64 z,
                                            const DivisibilityRegistry* registry, double tail_tol,
                                            i64 cap) {
  if (z <= 0) return Distribution::point_mass(0);
  i64 p = phi(z);
  i64 g = std::gcd(p, z);
  i64 y = z / g;
  i64 x = p / g;
  DivisibilityVerdict v = divide(xi, y, registry);
  if (!v.component)
    throw ConstructionUnavailableError("no closed-form component of the offspring law for y = " +
                                       std::to_string(y));
  return iid_sum(*v.component, x, tail_tol, cap);
}

// Offspring rule of the equivalent PSDBP for a CBP with a Z-divisible random
// control: a compound of the control component (count) with offspring
// summands.
inline Distribution control_division_offspring(const ControlSpec& control, const Distribution& xi,
                                               i64 z, const DivisibilityRegistry* registry,
                                               double tail_tol, i64 cap) {
  if (z <= 0) return Distribution::point_mass(0);
  DivisibilityVerdict v = divide(control_law(control, z), z, registry);
  if (!v.component)
    throw ConstructionUnavailableError("no closed-form component of the control law at z = " +
                                       std::to_string(z));
  if (const auto* pm = v.component->get_if<Distribution::PointMass>())
    return iid_sum(xi, pm->c, tail_tol, cap);
  return compound_distribution(*v.component, xi, tail_tol, cap);
}

}  // namespace detail_eq

// Applies the rule chain in a fixed order; the first matching rule wins.
inline EquivalenceVerdict decide_equivalence(const CbpSpec& cbp, i64 z0, i64 cap,
                                             const DivisibilityRegistry* registry = nullptr) {
  EquivalenceVerdict out;

  // Rule 1: immigration at zero rules out any PSDBP.
  if (allows_immigration_at_zero(cbp.control)) {
    out.outcome = EqOutcome::no;
    out.rule = "immigration-at-zero";
    out.reason = "P(control(0) = 0) < 1, so state 0 is not absorbing";
    out.witness = 0;
    return out;
  }

  // Rule 2: a Z-divisible control function admits a PSDBP by rearranging the
  // double sum.
  ControlDivisibilityResult cd = control_divisibility(cbp, z0, cap, registry);
  if (cd.outcome == Divisibility::divisible) {
    out.outcome = EqOutcome::yes;
    out.rule = "divisible-control";
    out.reason = "control law is z-divisible at every audited state (" + cd.rule + ")";
    out.attainable_truncated = cd.truncated;
    out.audited_range_only = cd.truncated;
    out.construction_available = cd.constructive;
    return out;
  }

  // Rule 3: deterministic control, necessary and sufficient via the y-set.
  if (is_deterministic(cbp.control)) {
    YSet ys = y_set(cbp, z0, cap);
    out.attainable_truncated = ys.truncated;
    const bool inf_div = infinitely_divisible(cbp.offspring);
    std::optional<i64> first_unknown;
    bool components = true;
    for (i64 y : ys.values) {
      DivisibilityVerdict v = divide(cbp.offspring, y, registry);
      if (!inf_div) {
        if (v.outcome == Divisibility::not_divisible) {
          out.outcome = EqOutcome::no;
          out.rule = "deterministic-offspring-divisible";
          out.reason = "offspring law is not " + std::to_string(y) + "-divisible";
          out.witness = detail_eq::state_for_y(cbp, z0, cap, y);
          return out;
        }
        if (v.outcome == Divisibility::unknown && !first_unknown) first_unknown = y;
      }
      if (!v.component) components = false;
    }
    if (!inf_div && first_unknown) {
      out.outcome = EqOutcome::unknown;
      out.rule = "deterministic-offspring-divisible";
      out.reason = "offspring divisibility undecided for y = " + std::to_string(*first_unknown);
      out.witness = detail_eq::state_for_y(cbp, z0, cap, *first_unknown);
      return out;
    }
    out.outcome = EqOutcome::yes;
    out.rule = "deterministic-offspring-divisible";
    out.reason = inf_div
                     ? "offspring law is infinitely divisible, hence y-divisible for every y"
                     : "offspring law is y-divisible for every audited y";
    out.audited_range_only = ys.truncated && !inf_div;
    out.construction_available = components;
    return out;
  }

  // Rule 4: binomial control with Poisson offspring and a non-divisible
  // control cannot be a PSDBP (as long as psi >= 1 on positive states).
  if (const auto* b = std::get_if<BinomialControl>(&cbp.control)) {
    if (cbp.offspring.get_if<Distribution::Poisson>() != nullptr &&
        cd.outcome == Divisibility::not_divisible) {
      bool psi_positive = false;
      bool q_interior = true;
      std::optional<bool> analytic = b->psi.analytic_positive_on_positive();
      AttainableSet att = attainable_set(ProcessSpec{cbp}, z0, cap);
      for (i64 z : att.states) {
        if (z == 0) continue;
        double q = b->q(z);
        if (!(q > 0.0 && q < 1.0)) q_interior = false;
      }
      if (analytic.has_value()) {
        psi_positive = *analytic;
      } else {
        psi_positive = true;
        for (i64 z : att.states)
          if (z >= 1 && b->psi(z) < 1) psi_positive = false;
        if (att.truncated) psi_positive = false;  // cannot certify beyond the cap
      }
      if (psi_positive && q_interior) {
        out.outcome = EqOutcome::no;
        out.rule = "binomial-control-poisson-offspring";
        out.reason = "binomial control is not z-divisible and the Poisson-offspring one-step law "
                     "has no z-th pgf root";
        out.witness = cd.witness;
        out.attainable_truncated = att.truncated;
        return out;
      }
    }
    // Rule 5: binomial control with geometric offspring; the one-step law
    // splits into zero-inflated geometric summands, which are infinitely
    // divisible but have no closed-form components.
    if (cbp.offspring.get_if<Distribution::Geometric>() != nullptr) {
      out.outcome = EqOutcome::yes;
      out.rule = "binomial-control-geometric-offspring";
      out.reason = "per-parent contributions are zero-inflated geometric, which is infinitely "
                   "divisible; no closed-form components are known";
      out.construction_available = false;
      return out;
    }
  }

  out.outcome = EqOutcome::unknown;
  out.rule = "outside-rule-catalog";
  out.reason = "no decision rule applies; the general classification is open";
  return out;
}

// ---------------------------------------------------------------------------
// Construction of the equivalent PSDBP, with a kernel-equality audit.

struct KernelComparison {
  double max_abs_diff = 0.0;
  double min_row_mass = 1.0;
  i64 states_checked = 0;
};

inline KernelComparison compare_kernels(const TransitionKernel& a, const TransitionKernel& b,
                                        const std::vector<i64>& states) {
  KernelComparison out;
  for (i64 s : states) {
    auto ra = a.row(s);
    auto rb = b.row(s);
    i64 lo = std::min(ra->lo, rb->lo);
    i64 hi = std::max(ra->hi(), rb->hi());
    for (i64 v = lo; v <= hi; ++v)
      out.max_abs_diff = std::max(out.max_abs_diff, std::abs(ra->pmf_at(v) - rb->pmf_at(v)));
    out.min_row_mass = std::min({out.min_row_mass, ra->mass, rb->mass});
    ++out.states_checked;
  }
  return out;
}

// Builds the equivalent PSDBP for a CBP whose equivalence verdict is Yes with
// closed-form components, and audits pointwise kernel equality on attainable
// states up to min(cap, 50).
inline PsdbpSpec construct_equivalent_psdbp(const CbpSpec& cbp, i64 z0, i64 cap,
                                            const DivisibilityRegistry* registry = nullptr,
                                            double tail_tol = kDefaultTailTol,
                                            double audit_tol = 1e-12) {
  EquivalenceVerdict verdict = decide_equivalence(cbp, z0, cap, registry);
  if (verdict.outcome != EqOutcome::yes)
    throw ConstructionUnavailableError("process has no (known) equivalent PSDBP: rule " +
                                       verdict.rule);
  if (!verdict.construction_available)
    throw ConstructionUnavailableError(
        "equivalence is known only non-constructively (rule " + verdict.rule + ")");

  ControlSpec control = cbp.control;
  Distribution xi = cbp.offspring;
  i64 support_cap = kDefaultSupportCap;
  OffspringFamilyPtr family;
  if (const auto* det = std::get_if<DeterministicControl>(&control)) {
    ControlMap phi = det->map;
    family = std::make_shared<SynthesizedFamily>(
        [phi, xi, registry, tail_tol, support_cap](i64 z) {
          return detail_eq::dcbp_division_offspring(phi, xi, z, registry, tail_tol, support_cap);
        },
        "divided_offspring", "divided_offspring(base CBP offspring split per state)");
  } else {
    family = std::make_shared<SynthesizedFamily>(
        [control, xi, registry, tail_tol, support_cap](i64 z) {
          return detail_eq::control_division_offspring(control, xi, z, registry, tail_tol,
                                                       support_cap);
        },
        "divided_control", "divided_control(compound of control component with offspring)");
  }
  PsdbpSpec constructed{family};

  TransitionKernel cbp_kernel{ProcessSpec{cbp}, tail_tol};
  TransitionKernel psdbp_kernel{ProcessSpec{constructed}, tail_tol};
  AttainableSet att = attainable_set(ProcessSpec{cbp}, z0, cap);
  std::vector<i64> audit_states;
  for (i64 s : att.states) {
    if (s > std::min<i64>(cap, 50)) break;
    audit_states.push_back(s);
  }
  KernelComparison cmp = compare_kernels(cbp_kernel, psdbp_kernel, audit_states);
  if (cmp.max_abs_diff > audit_tol)
    throw ConstructionUnavailableError("construction failed its kernel-equality audit: max diff " +
                                       std::to_string(cmp.max_abs_diff));
  return constructed;
}

}  // namespace bplink
