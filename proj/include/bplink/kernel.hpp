#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/convolution.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/parallel.hpp"
#include "bplink/process.hpp"
#include "bplink/rng.hpp"

namespace bplink {

struct ConditionalMoments {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<Rational> mean_exact;
  std::optional<Rational> variance_exact;
};

// Conditional mean and variance of the next generation given current size z.
// PSDBP: (z m(z), z s2(z)); CBP: (E[phi] m, E[phi] s2 + Var(phi) m^2), which
// collapses to (phi(z) m, phi(z) s2) for deterministic control.
inline ConditionalMoments conditional_moments(const ProcessSpec& spec, i64 z) {
  ConditionalMoments out;
  if (const auto* p = std::get_if<PsdbpSpec>(&spec)) {
    Distribution law = p->family->offspring(z);
    double zd = static_cast<double>(z);
    out.mean = zd * law.mean();
    out.variance = zd * law.variance();
    try {
      if (auto m = p->family->mean_exact(z)) out.mean_exact = Rational(z) * *m;
      if (auto v = p->family->variance_exact(z)) out.variance_exact = Rational(z) * *v;
    } catch (const RationalOverflowError&) {
    }
    return out;
  }
  const auto& c = std::get<CbpSpec>(spec);
  ControlMoments cm = control_moments(c.control, z);
  double m = c.offspring.mean();
  double s2 = c.offspring.variance();
  out.mean = cm.mean * m;
  out.variance = cm.mean * s2 + cm.variance * m * m;
  try {
    auto me = c.offspring.mean_exact();
    auto ve = c.offspring.variance_exact();
    if (cm.mean_exact && me) out.mean_exact = *cm.mean_exact * *me;
    if (cm.mean_exact && cm.variance_exact && me && ve)
      out.variance_exact = *cm.mean_exact * *ve + *cm.variance_exact * *me * *me;
  } catch (const RationalOverflowError&) {
  }
  return out;
}

// Dense one-step pmf from a fixed source state, with log values and an
// inclusive cdf for inverse-transform sampling.
struct KernelRow {
  i64 lo = 0;
  std::vector<double> pmf;
  std::vector<double> log_pmf;
  std::vector<double> cdf;
  double mass = 0.0;

  i64 hi() const { return lo + static_cast<i64>(pmf.size()) - 1; }

  double pmf_at(i64 b) const {
    if (b < lo || b > hi()) return 0.0;
    return pmf[static_cast<std::size_t>(b - lo)];
  }
  double log_pmf_at(i64 b) const {
    if (b < lo || b > hi()) return kNegInf;
    return log_pmf[static_cast<std::size_t>(b - lo)];
  }
  // Inverse CDF on the truncated row; u uniform in [0,1).
  i64 sample(double u) const {
    double target = u * mass;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) return hi();
    return lo + static_cast<i64>(it - cdf.begin());
  }
};

// Exact one-step transition law of a process, with per-state row caching.
// Rows are pure functions of (spec, tail_tol), so concurrent cache fills are
// idempotent; the cache is advisory and can be disabled.
class TransitionKernel {
public:
  explicit TransitionKernel(ProcessSpec spec, double tail_tol = kDefaultTailTol,
                            i64 support_cap = kDefaultSupportCap)
      : spec_(std::move(spec)), tail_tol_(tail_tol), support_cap_(support_cap) {
    if (const char* env = std::getenv("BPLINK_CACHE_CAP")) {
      i64 cap = std::atoll(env);
      if (cap >= 0) cache_cap_ = cap;
    }
  }

  const ProcessSpec& spec() const { return spec_; }
  double tail_tol() const { return tail_tol_; }
  i64 support_cap() const { return support_cap_; }

  void set_cache_enabled(bool on) { cache_enabled_ = on; }

  // Closed-family form of the one-step law from state a, when it reduces.
  std::optional<Distribution> one_step_closed(i64 a) const {
    if (const auto* p = std::get_if<PsdbpSpec>(&spec_)) {
      if (a == 0) return Distribution::point_mass(0);
      return iid_sum_closed(p->family->offspring(a), a);
    }
    const auto& c = std::get<CbpSpec>(spec_);
    Distribution ctrl = control_law(c.control, a);
    if (const auto* pm = ctrl.get_if<Distribution::PointMass>())
      return iid_sum_closed(c.offspring, pm->c);
    return std::nullopt;
  }

  // One-step law as a Distribution (closed family or explicit finite support).
  Distribution one_step_law(i64 a) const {
    if (auto closed = one_step_closed(a)) return *closed;
    if (const auto* p = std::get_if<PsdbpSpec>(&spec_))
      return iid_sum(p->family->offspring(a), a, tail_tol_, support_cap_);
    const auto& c = std::get<CbpSpec>(spec_);
    Distribution ctrl = control_law(c.control, a);
    if (const auto* pm = ctrl.get_if<Distribution::PointMass>())
      return iid_sum(c.offspring, pm->c, tail_tol_, support_cap_);
    return compound_distribution(ctrl, c.offspring, tail_tol_, support_cap_);
  }

  std::shared_ptr<const KernelRow> row(i64 a) const {
    if (cache_enabled_) {
      std::shared_lock lock(mu_);
      auto it = cache_.find(a);
      if (it != cache_.end()) return it->second;
    }
    auto r = std::make_shared<KernelRow>(build_row(a));
    if (cache_enabled_) {
      std::unique_lock lock(mu_);
      if (cache_cap_ == 0 || static_cast<i64>(cache_.size()) < cache_cap_)
        cache_.emplace(a, r);
      auto it = cache_.find(a);
      if (it != cache_.end()) return it->second;
    }
    return r;
  }

  // P(next = b | current = a). Closed families are evaluated analytically,
  // so the value does not depend on any row truncation.
  double transition_pmf(i64 a, i64 b) const {
    if (b < 0) return 0.0;
    if (auto closed = one_step_closed(a)) return closed->pmf(b);
    return row(a)->pmf_at(b);
  }

  double log_transition_pmf(i64 a, i64 b) const {
    if (b < 0) return kNegInf;
    if (auto closed = one_step_closed(a)) return closed->log_pmf(b);
    return row(a)->log_pmf_at(b);
  }

private:
  KernelRow build_row(i64 a) const {
    Distribution law = one_step_law(a);
    KernelRow r;
    if (const auto* f = law.get_if<Distribution::FiniteSupport>()) {
      r.lo = f->values.front();
      std::size_t width = static_cast<std::size_t>(f->values.back() - r.lo + 1);
      r.pmf.assign(width, 0.0);
      for (std::size_t i = 0; i < f->values.size(); ++i)
        r.pmf[static_cast<std::size_t>(f->values[i] - r.lo)] = f->probs[i];
    } else {
      SupportWindow w = law.truncated_support(tail_tol_, support_cap_);
      r.lo = w.lo;
      r.pmf.resize(static_cast<std::size_t>(w.hi - w.lo + 1));
      for (i64 k = w.lo; k <= w.hi; ++k) r.pmf[static_cast<std::size_t>(k - w.lo)] = law.pmf(k);
    }
    r.log_pmf.resize(r.pmf.size());
    r.cdf.resize(r.pmf.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < r.pmf.size(); ++i) {
      r.log_pmf[i] = r.pmf[i] > 0.0 ? std::log(r.pmf[i]) : kNegInf;
      cum += r.pmf[i];
      r.cdf[i] = cum;
    }
    r.mass = cum;
    return r;
  }

  ProcessSpec spec_;
  double tail_tol_;
  i64 support_cap_;
  i64 cache_cap_ = 0;  // 0 = unlimited
  bool cache_enabled_ = true;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<i64, std::shared_ptr<const KernelRow>> cache_;
};

// ---------------------------------------------------------------------------
// Trajectory simulation. Each path draws from its own (seed, path) stream and
// steps by direct summation of offspring draws, so output is identical for
// any worker count.

struct TrajectoryTable {
  i64 z0 = 0;
  u64 seed = 0;
  // sizes[p][g] = population size of path p at generation g (g = 0 is z0).
  std::vector<std::vector<i64>> sizes;
};

namespace detail_kernel {

inline i64 simulate_step(const ProcessSpec& spec, i64 z, RngStream& stream) {
  if (const auto* p = std::get_if<PsdbpSpec>(&spec)) {
    if (z == 0) return 0;
    Distribution law = p->family->offspring(z);
    i64 next = 0;
    for (i64 i = 0; i < z; ++i) next += law.sample(stream);
    return next;
  }
  const auto& c = std::get<CbpSpec>(spec);
  Distribution ctrl = control_law(c.control, z);
  i64 parents = ctrl.sample(stream);
  i64 next = 0;
  for (i64 i = 0; i < parents; ++i) next += c.offspring.sample(stream);
  return next;
}

}  // namespace detail_kernel

// Population sizes above this abort a simulation; stepping costs O(z) draws,
// so a supercritical blow-up would otherwise run away.
inline constexpr i64 kSimulatePopulationCap = 5'000'000;

inline TrajectoryTable simulate(const ProcessSpec& spec, i64 z0, i64 generations, i64 paths,
                                u64 seed, const ParallelOptions& par = ParallelOptions::from_env()) {
  if (generations < 1 || paths < 1)
    throw ValidationError("simulate: generations and paths must be >= 1");
  if (z0 < 0) throw ValidationError("simulate: z0 must be >= 0");
  TrajectoryTable out;
  out.z0 = z0;
  out.seed = seed;
  out.sizes.assign(static_cast<std::size_t>(paths),
                   std::vector<i64>(static_cast<std::size_t>(generations) + 1, 0));
  parallel_chunks(paths, 1, par.resolve(), [&](i64, i64 begin, i64 end) {
    for (i64 p = begin; p < end; ++p) {
      RngStream stream =
          RngStream::derive(seed, {rng_domain::simulate, static_cast<u64>(p)});
      i64 z = z0;
      auto& row = out.sizes[static_cast<std::size_t>(p)];
      row[0] = z;
      for (i64 g = 1; g <= generations; ++g) {
        z = detail_kernel::simulate_step(spec, z, stream);
        if (z > kSimulatePopulationCap)
          throw SupportOverflowError("simulate: population exceeded cap at path " +
                                     std::to_string(p) + ", generation " + std::to_string(g));
        row[static_cast<std::size_t>(g)] = z;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Attainable set: breadth-first closure of one-step supports from z0,
// intersected with [0, cap].

struct AttainableSet {
  std::vector<i64> states;
  bool truncated = false;     // some one-step support exceeded cap
  bool all_of_range = false;  // every state in [0, cap] is attainable
};

namespace detail_kernel {

struct SupportDesc {
  bool all_n0 = false;       // support is all of N0
  std::vector<i64> values;   // otherwise: values, capped at cap
  bool truncated = false;    // values beyond cap were cut
};

// Support of the law itself (not the transition).
inline SupportDesc law_support(const Distribution& d, i64 cap) {
  SupportDesc s;
  auto mx = d.support_max();
  if (!mx) {
    // Catalog families with unbounded support place mass on every k in N0.
    s.all_n0 = true;
    return s;
  }
  if (const auto* f = d.get_if<Distribution::FiniteSupport>()) {
    for (std::size_t i = 0; i < f->values.size(); ++i) {
      if (f->probs[i] <= 0.0) continue;
      if (f->values[i] > cap) {
        s.truncated = true;
        break;
      }
      s.values.push_back(f->values[i]);
    }
    return s;
  }
  for (i64 k = d.support_min(); k <= *mx; ++k) {
    if (d.pmf(k) <= 0.0) continue;
    if (k > cap) {
      s.truncated = true;
      break;
    }
    s.values.push_back(k);
  }
  return s;
}

// m-fold sumset of `vals`, capped. Exponentiation by squaring on boolean
// reachability vectors.
inline SupportDesc sumset_power(const std::vector<i64>& vals, i64 m, i64 cap) {
  SupportDesc out;
  if (m == 0 || (vals.size() == 1 && vals[0] == 0)) {
    out.values = {0};
    return out;
  }
  auto conv = [&](const std::vector<char>& a, const std::vector<char>& b, bool& trunc) {
    std::vector<char> r(static_cast<std::size_t>(cap) + 1, 0);
    for (i64 i = 0; i <= cap; ++i) {
      if (!a[static_cast<std::size_t>(i)]) continue;
      for (i64 j = 0; j <= cap; ++j) {
        if (!b[static_cast<std::size_t>(j)]) continue;
        if (i + j > cap) {
          trunc = true;
          break;
        }
        r[static_cast<std::size_t>(i + j)] = 1;
      }
    }
    return r;
  };
  std::vector<char> base(static_cast<std::size_t>(cap) + 1, 0);
  for (i64 v : vals)
    if (v <= cap)
      base[static_cast<std::size_t>(v)] = 1;
    else
      out.truncated = true;
  std::vector<char> result(static_cast<std::size_t>(cap) + 1, 0);
  result[0] = 1;
  i64 e = m;
  bool trunc = out.truncated;
  while (e > 0) {
    if (e & 1) result = conv(result, base, trunc);
    e >>= 1;
    if (e > 0) base = conv(base, base, trunc);
  }
  out.truncated = trunc;
  for (i64 v = 0; v <= cap; ++v)
    if (result[static_cast<std::size_t>(v)]) out.values.push_back(v);
  return out;
}

// Union of j-fold sumsets over all j in the support of `count`.
inline SupportDesc random_sum_support(const Distribution& count, const Distribution& summand,
                                      i64 cap) {
  SupportDesc out;
  SupportDesc cs = law_support(count, cap);
  SupportDesc ss = law_support(summand, cap);
  bool count_positive = cs.all_n0 || cs.values.size() > 1 ||
                        (cs.values.size() == 1 && cs.values[0] > 0);
  if (ss.all_n0) {
    if (!count_positive) {
      out.values = {0};
      return out;
    }
    out.all_n0 = true;
    return out;
  }
  out.truncated = cs.truncated || ss.truncated;
  std::vector<char> reach(static_cast<std::size_t>(cap) + 1, 0);
  if (cs.all_n0) {
    // Arbitrarily many summands allowed: the monoid generated by the support.
    reach[0] = 1;
    for (i64 v = 0; v <= cap; ++v) {
      if (!reach[static_cast<std::size_t>(v)]) continue;
      for (i64 s : ss.values) {
        if (v + s > cap) {
          if (s > 0) out.truncated = true;
          continue;
        }
        reach[static_cast<std::size_t>(v + s)] = 1;
      }
    }
  } else {
    i64 max_j = cs.values.empty() ? 0 : cs.values.back();
    std::vector<char> cur(static_cast<std::size_t>(cap) + 1, 0);
    cur[0] = 1;
    std::size_t ci = 0;
    for (i64 j = 0; j <= max_j; ++j) {
      while (ci < cs.values.size() && cs.values[ci] < j) ++ci;
      bool j_in_count = ci < cs.values.size() && cs.values[ci] == j;
      if (j_in_count)
        for (i64 v = 0; v <= cap; ++v)
          if (cur[static_cast<std::size_t>(v)]) reach[static_cast<std::size_t>(v)] = 1;
      if (j == max_j) break;
      std::vector<char> nxt(static_cast<std::size_t>(cap) + 1, 0);
      for (i64 v = 0; v <= cap; ++v) {
        if (!cur[static_cast<std::size_t>(v)]) continue;
        for (i64 s : ss.values) {
          if (v + s > cap) {
            if (s > 0) out.truncated = true;
            continue;
          }
          nxt[static_cast<std::size_t>(v + s)] = 1;
        }
      }
      cur = std::move(nxt);
    }
  }
  for (i64 v = 0; v <= cap; ++v)
    if (reach[static_cast<std::size_t>(v)]) out.values.push_back(v);
  return out;
}

inline SupportDesc one_step_support(const ProcessSpec& spec, i64 a, i64 cap) {
  if (const auto* p = std::get_if<PsdbpSpec>(&spec)) {
    if (a == 0) {
      SupportDesc s;
      s.values = {0};
      return s;
    }
    Distribution law = p->family->offspring(a);
    SupportDesc ls = law_support(law, cap);
    if (ls.all_n0) return ls;
    SupportDesc out = sumset_power(ls.values, a, cap);
    out.truncated = out.truncated || ls.truncated;
    return out;
  }
  const auto& c = std::get<CbpSpec>(spec);
  return random_sum_support(control_law(c.control, a), c.offspring, cap);
}

}  // namespace detail_kernel

inline AttainableSet attainable_set(const ProcessSpec& spec, i64 z0, i64 cap) {
  if (cap < z0) throw ValidationError("attainable_set: cap must be >= z0");
  AttainableSet out;
  std::vector<char> seen(static_cast<std::size_t>(cap) + 1, 0);
  std::vector<i64> frontier{z0};
  seen[static_cast<std::size_t>(z0)] = 1;
  while (!frontier.empty()) {
    i64 a = frontier.back();
    frontier.pop_back();
    detail_kernel::SupportDesc s = detail_kernel::one_step_support(spec, a, cap);
    if (s.truncated) out.truncated = true;
    if (s.all_n0) {
      out.truncated = true;
      for (i64 v = 0; v <= cap; ++v) seen[static_cast<std::size_t>(v)] = 1;
      break;
    }
    for (i64 v : s.values) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        frontier.push_back(v);
      }
    }
  }
  for (i64 v = 0; v <= cap; ++v)
    if (seen[static_cast<std::size_t>(v)]) out.states.push_back(v);
  out.all_of_range = static_cast<i64>(out.states.size()) == cap + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Carrying-capacity audit: mean drift must be upward below K and downward
// above K.

struct DriftViolation {
  i64 z;
  double mean;
  enum class Kind { no_growth_below, no_decline_above } kind;
};

struct CarryingCapacityReport {
  double K = 0.0;
  std::vector<DriftViolation> violations;
  i64 zero_drift_states = 0;  // states with mean exactly equal to z
  bool ok() const { return violations.empty(); }
  bool nowhere_drift() const {
    return !violations.empty() &&
           static_cast<i64>(violations.size()) == zero_drift_states;
  }
};

inline CarryingCapacityReport carrying_capacity_audit(const ProcessSpec& spec, double K, i64 z_lo,
                                                      i64 z_hi) {
  if (!(K > 0)) throw ValidationError("carrying_capacity_audit: K must be > 0");
  if (z_lo < 0 || z_hi < z_lo) throw ValidationError("carrying_capacity_audit: bad z range");
  CarryingCapacityReport rep;
  rep.K = K;
  for (i64 z = std::max<i64>(z_lo, 1); z <= z_hi; ++z) {
    double zd = static_cast<double>(z);
    if (zd == K) continue;
    double mean = conditional_moments(spec, z).mean;
    if (zd < K && !(mean > zd)) {
      rep.violations.push_back({z, mean, DriftViolation::Kind::no_growth_below});
      if (mean == zd) ++rep.zero_drift_states;
    } else if (zd > K && !(mean < zd)) {
      rep.violations.push_back({z, mean, DriftViolation::Kind::no_decline_above});
      if (mean == zd) ++rep.zero_drift_states;
    }
  }
  return rep;
}

}  // namespace bplink
