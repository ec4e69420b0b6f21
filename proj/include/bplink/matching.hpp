#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bplink/control.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/kernel.hpp"
#include "bplink/process.hpp"
#include "bplink/rational.hpp"

namespace bplink {

// Minimum variance of any law on N0 with mean alpha: d(1-d), d = frac(alpha).
inline Rational min_variance(const Rational& alpha) {
  if (alpha <= Rational(0)) throw ValidationError("min_variance: alpha must be > 0");
  Rational d = alpha.frac();
  return d * (Rational(1) - d);
}

inline double min_variance(double alpha) {
  if (!(alpha > 0)) throw ValidationError("min_variance: alpha must be > 0");
  double d = alpha - std::floor(alpha);
  return d * (1.0 - d);
}

namespace detail_match {

// Two-point law on {y1, y2} with mean alpha: p1 = (y2-a)/(y2-y1).
struct TwoPoint {
  i64 y1, y2;
  Rational p1, p2;
  Rational variance(const Rational& alpha) const {
    return -Rational(y1) * Rational(y2) + alpha * Rational(y1 + y2) - alpha * alpha;
  }
};

inline TwoPoint two_point(i64 y1, i64 y2, const Rational& alpha) {
  Rational span(y2 - y1);
  return {y1, y2, (Rational(y2) - alpha) / span, (alpha - Rational(y1)) / span};
}

inline Distribution from_atoms(std::vector<std::pair<i64, Rational>> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<i64> values;
  std::vector<Rational> probs;
  for (const auto& [v, p] : atoms) {
    if (p.is_zero()) continue;
    if (!values.empty() && values.back() == v) {
      probs.back() += p;
    } else {
      values.push_back(v);
      probs.push_back(p);
    }
  }
  return Distribution::finite_support(std::move(values), std::move(probs));
}

}  // namespace detail_match

// A finite-support law on N0 with mean alpha and variance beta, built from
// the minimum-variance two-point law mixed with a wider two-point law. Exact
// when the inputs are rational.
inline Distribution construct_offspring(const Rational& alpha, const Rational& beta) {
  if (alpha <= Rational(0)) throw ValidationError("construct_offspring: alpha must be > 0");
  Rational floor_part(alpha.floor());
  Rational d = alpha - floor_part;
  Rational dvar = d * (Rational(1) - d);
  if (beta < dvar)
    throw InfeasibleVarianceError("variance " + beta.str() + " below minimum " + dvar.str() +
                                  " for mean " + alpha.str());
  const i64 fl = alpha.floor();
  if (beta == dvar) {
    if (d.is_zero()) return Distribution::point_mass(fl);
    return detail_match::from_atoms({{fl, Rational(1) - d}, {fl + 1, d}});
  }
  detail_match::TwoPoint wide{};
  if (!d.is_zero()) {
    // y = ceil((beta + alpha^2 - alpha*floor)/(alpha - floor)) = ceil(beta/d + alpha)
    Rational y_exact = (beta + alpha * alpha - alpha * floor_part) / d;
    wide = detail_match::two_point(fl, y_exact.ceil(), alpha);
  } else {
    Rational hi_exact = alpha + beta;
    wide = detail_match::two_point(fl - 1, hi_exact.ceil(), alpha);
  }
  Rational wide_var = wide.variance(alpha);
  Rational q = (beta - dvar) / (wide_var - dvar);
  std::vector<std::pair<i64, Rational>> atoms;
  Rational keep = Rational(1) - q;
  if (d.is_zero()) {
    atoms.emplace_back(fl, keep);
  } else {
    atoms.emplace_back(fl, keep * (Rational(1) - d));
    atoms.emplace_back(fl + 1, keep * d);
  }
  atoms.emplace_back(wide.y1, q * wide.p1);
  atoms.emplace_back(wide.y2, q * wide.p2);
  return detail_match::from_atoms(std::move(atoms));
}

inline Distribution construct_offspring(double alpha, double beta) {
  auto ar = Rational::approximate(alpha, 1e-14);
  auto br = Rational::approximate(beta, 1e-14);
  if (ar && br) {
    try {
      return construct_offspring(*ar, *br);
    } catch (const RationalOverflowError&) {
    } catch (const InfeasibleVarianceError&) {
      throw;
    }
  }
  if (!(alpha > 0)) throw ValidationError("construct_offspring: alpha must be > 0");
  double fl = std::floor(alpha);
  double d = alpha - fl;
  double dvar = d * (1.0 - d);
  if (beta < dvar - 1e-15)
    throw InfeasibleVarianceError("variance below minimum for the requested mean");
  if (beta <= dvar) {
    if (d == 0.0) return Distribution::point_mass(static_cast<i64>(fl));
    return Distribution::finite_support({static_cast<i64>(fl), static_cast<i64>(fl) + 1},
                                        std::vector<double>{1.0 - d, d});
  }
  i64 y1 = d > 0.0 ? static_cast<i64>(fl) : static_cast<i64>(fl) - 1;
  i64 y2 = d > 0.0 ? static_cast<i64>(std::ceil((beta + alpha * alpha - alpha * fl) / d))
                   : static_cast<i64>(std::ceil(alpha + beta));
  double span = static_cast<double>(y2 - y1);
  double p2 = (alpha - static_cast<double>(y1)) / span;
  double wide_var = -static_cast<double>(y1) * static_cast<double>(y2) +
                    alpha * static_cast<double>(y1 + y2) - alpha * alpha;
  double q = (beta - dvar) / (wide_var - dvar);
  std::map<i64, double> atoms;
  if (d == 0.0) {
    atoms[static_cast<i64>(fl)] += 1.0 - q;
  } else {
    atoms[static_cast<i64>(fl)] += (1.0 - q) * (1.0 - d);
    atoms[static_cast<i64>(fl) + 1] += (1.0 - q) * d;
  }
  atoms[y1] += q * (1.0 - p2);
  atoms[y2] += q * p2;
  std::vector<i64> values;
  std::vector<double> probs;
  for (auto& [v, p] : atoms) {
    if (p <= 0.0) continue;
    values.push_back(v);
    probs.push_back(p);
  }
  return Distribution::finite_support(std::move(values), std::move(probs));
}

// ---------------------------------------------------------------------------
// Moment-match verification: z m(z) = mean-tilde(z) and the variance
// analogue, exact in rational arithmetic where available, else within a
// relative tolerance.

struct MatchResidual {
  i64 z;
  double mean_residual;
  double variance_residual;
  bool exact;  // compared in rational arithmetic
};

struct CheckMatchResult {
  bool matched = true;
  double max_relative_residual = 0.0;
  std::vector<MatchResidual> violations;
};

inline CheckMatchResult check_match(const PsdbpSpec& psdbp, const CbpSpec& cbp, i64 z_lo, i64 z_hi,
                                    double rel_tol = 1e-10) {
  if (z_lo < 0 || z_hi < z_lo) throw ValidationError("check_match: bad z range");
  CheckMatchResult out;
  for (i64 z = z_lo; z <= z_hi; ++z) {
    ConditionalMoments a = conditional_moments(ProcessSpec{psdbp}, z);
    ConditionalMoments b = conditional_moments(ProcessSpec{cbp}, z);
    bool exact = a.mean_exact && b.mean_exact && a.variance_exact && b.variance_exact;
    bool bad;
    double mean_res, var_res;
    if (exact) {
      bad = !(*a.mean_exact == *b.mean_exact && *a.variance_exact == *b.variance_exact);
      mean_res = (*a.mean_exact - *b.mean_exact).to_double();
      var_res = (*a.variance_exact - *b.variance_exact).to_double();
    } else {
      auto rel = [](double x, double y) {
        double scale = std::max({1.0, std::abs(x), std::abs(y)});
        return std::abs(x - y) / scale;
      };
      mean_res = rel(a.mean, b.mean);
      var_res = rel(a.variance, b.variance);
      bad = mean_res > rel_tol || var_res > rel_tol;
      out.max_relative_residual = std::max({out.max_relative_residual, mean_res, var_res});
    }
    if (bad) {
      out.matched = false;
      out.violations.push_back({z, mean_res, var_res, exact});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Match reports.

enum class Feasibility { feasible, infeasible, unknown };

struct MatchReport {
  Feasibility feasibility = Feasibility::unknown;
  std::optional<i64> witness;
  std::string failed_condition;
  std::optional<PsdbpSpec> psdbp_construction;
  std::optional<CbpSpec> dcbp_construction;
  std::vector<std::pair<i64, double>> d_values;  // z -> d(z)
  bool truncated = false;

  bool feasible() const { return feasibility == Feasibility::feasible; }
};

// A PSDBP matching a given DCBP exists iff sigma2-tilde phi(z)/z clears the
// minimum-variance floor d(z)(1-d(z)) at every attainable z >= 1.
inline MatchReport match_psdbp_to_dcbp(const CbpSpec& dcbp, i64 z0, i64 cap) {
  const auto* det = std::get_if<DeterministicControl>(&dcbp.control);
  if (det == nullptr) throw ValidationError("match_psdbp_to_dcbp: control must be deterministic");
  const ControlMap phi = det->map;

  auto m_tilde_e = dcbp.offspring.mean_exact();
  auto s2_tilde_e = dcbp.offspring.variance_exact();
  const double m_tilde = dcbp.offspring.mean();
  const double s2_tilde = dcbp.offspring.variance();

  AttainableSet att = attainable_set(ProcessSpec{dcbp}, z0, cap);
  MatchReport out;
  out.truncated = att.truncated;
  for (i64 z : att.states) {
    if (z == 0) continue;
    i64 p = phi(z);
    if (m_tilde_e && s2_tilde_e) {
      try {
        Rational ratio(p, z);
        Rational alpha = *m_tilde_e * ratio;
        Rational beta = *s2_tilde_e * ratio;
        Rational d = alpha.frac();
        out.d_values.emplace_back(z, d.to_double());
        if (beta < d * (Rational(1) - d)) {
          out.feasibility = Feasibility::infeasible;
          out.failed_condition = "variance-floor";
          out.witness = z;
          return out;
        }
        continue;
      } catch (const RationalOverflowError&) {
      }
    }
    double ratio = static_cast<double>(p) / static_cast<double>(z);
    double alpha = m_tilde * ratio;
    double beta = s2_tilde * ratio;
    double d = alpha - std::floor(alpha);
    out.d_values.emplace_back(z, d);
    if (beta < d * (1.0 - d) - 1e-15) {
      out.feasibility = Feasibility::infeasible;
      out.failed_condition = "variance-floor";
      out.witness = z;
      return out;
    }
  }

  out.feasibility = Feasibility::feasible;
  Distribution offspring = dcbp.offspring;
  auto rule = [phi, offspring](i64 z) -> Distribution {
    if (z <= 0) return Distribution::point_mass(0);
    i64 p = phi(z);
    if (p == 0) return Distribution::point_mass(0);
    auto me = offspring.mean_exact();
    auto ve = offspring.variance_exact();
    if (me && ve) {
      try {
        Rational ratio(p, z);
        return construct_offspring(*me * ratio, *ve * ratio);
      } catch (const RationalOverflowError&) {
      }
    }
    double ratio = static_cast<double>(p) / static_cast<double>(z);
    return construct_offspring(offspring.mean() * ratio, offspring.variance() * ratio);
  };
  out.psdbp_construction = PsdbpSpec{std::make_shared<SynthesizedFamily>(
      rule, "matched_offspring", "matched_offspring(minimal-support laws from the DCBP moments)")};
  return out;
}

// A DCBP matching a given PSDBP exists iff offspring variances vanish
// everywhere (deterministic case) or the mean/variance ratio is a constant k
// and some h with all m(z) in h*N0 clears the variance floor for (h, h/k).
inline MatchReport match_dcbp_to_psdbp(const PsdbpSpec& psdbp, i64 z0, i64 cap,
                                       i64 x_cap = 10000) {
  MatchReport out;
  AttainableSet att = attainable_set(ProcessSpec{psdbp}, z0, cap);
  out.truncated = att.truncated;

  struct StateMoments {
    i64 z;
    Rational m;
    Rational s2;
  };
  std::vector<StateMoments> states;
  for (i64 z : att.states) {
    if (z == 0) continue;
    auto me = psdbp.family->mean_exact(z);
    auto ve = psdbp.family->variance_exact(z);
    if (!me || !ve) {
      Distribution law = psdbp.family->offspring(z);
      me = me ? me : Rational::approximate(law.mean(), 1e-10);
      ve = ve ? ve : Rational::approximate(law.variance(), 1e-10);
    }
    if (!me || !ve) {
      out.feasibility = Feasibility::unknown;
      out.failed_condition = "non-rational-moments";
      out.witness = z;
      return out;
    }
    states.push_back({z, *me, *ve});
  }

  auto build_phi = [&states](const Rational& h) -> ControlMap {
    std::optional<Rational> common;
    bool constant = true;
    for (const auto& s : states) {
      Rational n = s.m / h;
      if (!common)
        common = n;
      else if (!(*common == n))
        constant = false;
    }
    if (constant && common && common->is_integer() && !common->is_zero())
      return ControlMap::affine_floor(*common, Rational(0));
    std::map<i64, i64> tab;
    for (const auto& s : states) tab[s.z] = (Rational(s.z) * s.m / h).floor();
    tab[0] = 0;
    return ControlMap::table(std::move(tab), ControlMap::Table::Fallback::zero);
  };

  // Split degenerate (variance-free) states from the rest.
  bool any_positive_var = false, any_degenerate_mean = false;
  for (const auto& s : states) {
    if (!s.s2.is_zero())
      any_positive_var = true;
    else if (!s.m.is_zero())
      any_degenerate_mean = true;
  }

  if (!any_positive_var) {
    // Deterministic offspring everywhere: means are integers, match with a
    // point-mass offspring at the integer gcd.
    Rational h(0);
    for (const auto& s : states) {
      if (s.m.is_zero()) continue;
      if (!s.m.is_integer()) {
        out.feasibility = Feasibility::infeasible;
        out.failed_condition = "variance-floor";
        out.witness = s.z;
        return out;
      }
      h = h.is_zero() ? s.m : Rational::gcd(h, s.m);
    }
    if (h.is_zero()) h = Rational(1);  // all means zero: any unit offspring works
    out.feasibility = Feasibility::feasible;
    out.dcbp_construction =
        CbpSpec{DeterministicControl{build_phi(h)}, Distribution::point_mass(h.floor())};
    return out;
  }
  if (any_degenerate_mean) {
    for (const auto& s : states) {
      if (s.s2.is_zero() && !s.m.is_zero()) {
        out.feasibility = Feasibility::infeasible;
        out.failed_condition = "mean-variance-ratio";
        out.witness = s.z;
        return out;
      }
    }
  }

  // Condition (i): constant k = m(z)/s2(z) across states with m(z) != 0.
  std::optional<Rational> k;
  for (const auto& s : states) {
    if (s.m.is_zero()) continue;
    Rational kz = s.m / s.s2;
    if (!k)
      k = kz;
    else if (!(*k == kz)) {
      out.feasibility = Feasibility::infeasible;
      out.failed_condition = "mean-variance-ratio";
      out.witness = s.z;
      return out;
    }
  }
  if (!k) {
    // All means zero: trivially matched by phi == 0.
    out.feasibility = Feasibility::feasible;
    out.dcbp_construction = CbpSpec{
        DeterministicControl{ControlMap::table({{0, 0}}, ControlMap::Table::Fallback::zero)},
        Distribution::point_mass(1)};
    return out;
  }

  // Condition (ii): H non-empty; its maximal element is the rational gcd.
  Rational h_max(0);
  try {
    for (const auto& s : states) {
      if (s.m.is_zero()) continue;
      h_max = h_max.is_zero() ? s.m : Rational::gcd(h_max, s.m);
    }
  } catch (const RationalOverflowError&) {
    out.feasibility = Feasibility::unknown;
    out.failed_condition = "h-set-overflow";
    return out;
  }

  // Condition (iii), checked constructively: descend h_max/x until the
  // variance floor for mean h and variance h/k clears.
  for (i64 x = 1; x <= x_cap; ++x) {
    Rational h;
    try {
      h = h_max / Rational(x);
    } catch (const RationalOverflowError&) {
      break;
    }
    Rational d = h.frac();
    if (h / *k >= d * (Rational(1) - d)) {
      out.feasibility = Feasibility::feasible;
      Distribution offspring = construct_offspring(h, h / *k);
      out.dcbp_construction = CbpSpec{DeterministicControl{build_phi(h)}, std::move(offspring)};
      return out;
    }
  }
  out.feasibility = Feasibility::unknown;
  out.failed_condition = "no-feasible-h-within-x-cap";
  return out;
}

}  // namespace bplink
