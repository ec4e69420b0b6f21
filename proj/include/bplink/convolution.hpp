#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"

namespace bplink {

// Dense pmf segment: p[i] is the probability of value lo + i.
struct DensePmf {
  i64 lo = 0;
  std::vector<double> p;

  i64 hi() const { return lo + static_cast<i64>(p.size()) - 1; }
  double mass() const {
    double s = 0.0;
    for (double x : p) s += x;
    return s;
  }
};

namespace detail {

inline DensePmf to_dense(const Distribution& d, double tail_tol, i64 cap) {
  DensePmf out;
  if (const auto* f = d.get_if<Distribution::FiniteSupport>()) {
    out.lo = f->values.front();
    out.p.assign(static_cast<std::size_t>(f->values.back() - f->values.front() + 1), 0.0);
    for (std::size_t i = 0; i < f->values.size(); ++i)
      out.p[static_cast<std::size_t>(f->values[i] - out.lo)] = f->probs[i];
    if (static_cast<i64>(out.p.size()) > cap)
      throw SupportOverflowError("to_dense: support exceeds cap");
    return out;
  }
  SupportWindow w = d.truncated_support(tail_tol, cap);
  out.lo = w.lo;
  out.p.resize(static_cast<std::size_t>(w.hi - w.lo + 1));
  for (i64 k = w.lo; k <= w.hi; ++k) out.p[static_cast<std::size_t>(k - w.lo)] = d.pmf(k);
  return out;
}

// Trim leading/trailing mass up to tol/2 on each side.
inline void trim(DensePmf& a, double tol) {
  double half = tol / 2.0;
  std::size_t begin = 0, end = a.p.size();
  double acc = 0.0;
  while (begin < end && acc + a.p[begin] <= half) acc += a.p[begin++];
  acc = 0.0;
  while (end > begin && acc + a.p[end - 1] <= half) acc += a.p[--end];
  if (begin > 0 || end < a.p.size()) {
    a.lo += static_cast<i64>(begin);
    a.p = std::vector<double>(a.p.begin() + static_cast<std::ptrdiff_t>(begin),
                              a.p.begin() + static_cast<std::ptrdiff_t>(end));
  }
}

inline DensePmf convolve(const DensePmf& a, const DensePmf& b, double tol, i64 cap) {
  DensePmf out;
  out.lo = a.lo + b.lo;
  std::size_t n = a.p.size() + b.p.size() - 1;
  if (static_cast<i64>(n) > cap) throw SupportOverflowError("convolve: support exceeds cap");
  out.p.assign(n, 0.0);
  // Iterate the shorter operand on the outside.
  const DensePmf& s = a.p.size() <= b.p.size() ? a : b;
  const DensePmf& l = a.p.size() <= b.p.size() ? b : a;
  for (std::size_t i = 0; i < s.p.size(); ++i) {
    double w = s.p[i];
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < l.p.size(); ++j) out.p[i + j] += w * l.p[j];
  }
  trim(out, tol);
  return out;
}

// Mass deficit allowed in convolution/compound results. Repeated truncation
// compounds (an m-fold sum of a law carrying deficit d is short about m*d),
// so internal results get a laxer bound than user-constructed laws; interior
// pointwise accuracy is unaffected by the trimmed tails.
inline constexpr double kConvolutionDeficitTol = 1e-9;

inline Distribution from_dense(const DensePmf& a, double deficit_tol) {
  std::vector<i64> values;
  std::vector<double> probs;
  values.reserve(a.p.size());
  probs.reserve(a.p.size());
  for (std::size_t i = 0; i < a.p.size(); ++i) {
    if (a.p[i] > 0.0) {
      values.push_back(a.lo + static_cast<i64>(i));
      probs.push_back(a.p[i]);
    }
  }
  if (values.empty()) return Distribution::point_mass(0);
  return Distribution::finite_support_truncated(std::move(values), std::move(probs), deficit_tol);
}

}  // namespace detail

// Closed-form law of the sum of m iid copies, when the family has one.
inline std::optional<Distribution> iid_sum_closed(const Distribution& d, i64 m) {
  if (m == 0) return Distribution::point_mass(0);
  if (m == 1) return d;
  if (const auto* x = d.get_if<Distribution::PointMass>())
    return Distribution::point_mass(m * x->c);
  if (const auto* x = d.get_if<Distribution::Bernoulli>()) {
    if (x->p_exact) return Distribution::binomial(m, *x->p_exact);
    return Distribution::binomial(m, x->p);
  }
  if (const auto* x = d.get_if<Distribution::Binomial>()) {
    if (x->p_exact) return Distribution::binomial(m * x->n, *x->p_exact);
    return Distribution::binomial(m * x->n, x->p);
  }
  if (const auto* x = d.get_if<Distribution::Poisson>()) {
    if (x->mu_exact) {
      try {
        return Distribution::poisson(Rational(m) * *x->mu_exact);
      } catch (const RationalOverflowError&) {
      }
    }
    return Distribution::poisson(static_cast<double>(m) * x->mu);
  }
  if (const auto* x = d.get_if<Distribution::Geometric>()) {
    if (x->q_exact) return Distribution::negative_binomial(Rational(m), *x->q_exact);
    return Distribution::negative_binomial(static_cast<double>(m), x->q);
  }
  if (const auto* x = d.get_if<Distribution::NegativeBinomial>()) {
    if (x->r_exact && x->q_exact) {
      try {
        return Distribution::negative_binomial(Rational(m) * *x->r_exact, *x->q_exact);
      } catch (const RationalOverflowError&) {
      }
    }
    return Distribution::negative_binomial(static_cast<double>(m) * x->r, x->q);
  }
  return std::nullopt;
}

// Law of the sum of `count` iid copies of `summand`, where `count` is itself
// random. Used for the zero-inflated sums and for random-control kernels.
inline Distribution compound_distribution(const Distribution& count, const Distribution& summand,
                                          double tail_tol = kDefaultTailTol,
                                          i64 cap = kDefaultSupportCap) {
  SupportWindow jw = count.truncated_support(tail_tol / 4.0, cap);
  std::optional<Distribution> closed_probe = iid_sum_closed(summand, 2);

  DensePmf out;
  out.lo = 0;
  if (closed_probe.has_value()) {
    // The window covering every component law's truncated support catches all
    // but (tail_tol/4 + tail_tol/8) of the mass by construction.
    std::vector<std::pair<double, Distribution>> terms;
    std::vector<SupportWindow> windows;
    i64 hi = 0;
    for (i64 j = jw.lo; j <= jw.hi; ++j) {
      double w = count.pmf(j);
      if (w == 0.0) continue;
      Distribution law = *iid_sum_closed(summand, j);
      SupportWindow bw = law.truncated_support(tail_tol / 8.0, cap);
      hi = std::max(hi, bw.hi);
      terms.emplace_back(w, std::move(law));
      windows.push_back(bw);
    }
    if (hi > cap) throw SupportOverflowError("compound_distribution: window exceeds cap");
    out.p.assign(static_cast<std::size_t>(hi) + 1, 0.0);
    for (std::size_t t = 0; t < terms.size(); ++t)
      for (i64 b = windows[t].lo; b <= windows[t].hi; ++b)
        out.p[static_cast<std::size_t>(b)] += terms[t].first * terms[t].second.pmf(b);
  } else {
    double op_tol = tail_tol / (4.0 * static_cast<double>(jw.hi + 1));
    DensePmf cur;
    cur.lo = 0;
    cur.p = {1.0};
    DensePmf base = detail::to_dense(summand, op_tol, cap);
    for (i64 j = 0; j <= jw.hi; ++j) {
      double w = count.pmf(j);
      if (w > 0.0) {
        if (cur.hi() >= static_cast<i64>(out.p.size()))
          out.p.resize(static_cast<std::size_t>(cur.hi()) + 1, 0.0);
        for (std::size_t i = 0; i < cur.p.size(); ++i)
          out.p[static_cast<std::size_t>(cur.lo) + i] += w * cur.p[i];
      }
      if (j < jw.hi) cur = detail::convolve(cur, base, op_tol, cap);
    }
  }
  detail::trim(out, tail_tol / 8.0);
  return detail::from_dense(out, detail::kConvolutionDeficitTol);
}

// The law of the sum of m iid copies of d. Closed-form fast paths where the
// family is closed under iid summation; otherwise an explicit finite-support
// law computed by convolution with exponentiation by squaring.
inline Distribution iid_sum(const Distribution& d, i64 m, double tail_tol = kDefaultTailTol,
                            i64 cap = kDefaultSupportCap) {
  if (m < 0) throw ValidationError("iid_sum: m must be >= 0");
  if (m == 0) return Distribution::point_mass(0);
  if (m == 1) return d;
  if (auto closed = iid_sum_closed(d, m)) return *closed;

  if (const auto* x = d.get_if<Distribution::ZeroInflatedPoisson>()) {
    // Bin(m, 1-pi0) of the copies are "on"; the on-copies sum to a Poisson.
    Distribution on_count = x->pi0 >= 1.0
                                ? Distribution::point_mass(0)
                                : Distribution::binomial(m, 1.0 - x->pi0);
    return compound_distribution(on_count, Distribution::poisson(x->lambda), tail_tol, cap);
  }
  if (const auto* x = d.get_if<Distribution::ZeroInflatedGeometric>()) {
    Distribution on_count =
        x->p >= 1.0 ? Distribution::point_mass(0) : Distribution::binomial(m, 1.0 - x->p);
    return compound_distribution(on_count, Distribution::geometric(x->q), tail_tol, cap);
  }

  int squarings = 0;
  for (i64 e = m; e > 1; e >>= 1) ++squarings;
  double op_tol = tail_tol / (2.0 * static_cast<double>(2 * squarings + 2));

  DensePmf result;
  result.lo = 0;
  result.p = {1.0};
  DensePmf base = detail::to_dense(d, op_tol, cap);
  i64 e = m;
  while (e > 0) {
    if (e & 1) result = detail::convolve(result, base, op_tol, cap);
    e >>= 1;
    if (e > 0) base = detail::convolve(base, base, op_tol, cap);
  }
  return detail::from_dense(result, detail::kConvolutionDeficitTol);
}

}  // namespace bplink
