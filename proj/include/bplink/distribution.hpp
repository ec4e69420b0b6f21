#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/errors.hpp"
#include "bplink/rational.hpp"
#include "bplink/rng.hpp"

namespace bplink {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_factorial(i64 k) { return std::lgamma(static_cast<double>(k) + 1.0); }

inline double log_choose(i64 n, i64 k) {
  if (k < 0 || k > n) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double poisson_log_pmf(double mu, i64 k) {
  if (k < 0) return kNegInf;
  if (mu == 0.0) return k == 0 ? 0.0 : kNegInf;
  return static_cast<double>(k) * std::log(mu) - mu - log_factorial(k);
}

inline double binomial_log_pmf(i64 n, double p, i64 k) {
  if (k < 0 || k > n) return kNegInf;
  if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  return log_choose(n, k) + static_cast<double>(k) * std::log(p) +
         static_cast<double>(n - k) * std::log1p(-p);
}

// NB(r, q) on N0: pmf(k) = Gamma(k+r)/(k! Gamma(r)) q^r (1-q)^k, mean r(1-q)/q.
inline double nb_log_pmf(double r, double q, i64 k) {
  if (k < 0) return kNegInf;
  if (r == 0.0) return k == 0 ? 0.0 : kNegInf;
  double kd = static_cast<double>(k);
  return std::lgamma(kd + r) - log_factorial(k) - std::lgamma(r) + r * std::log(q) +
         kd * std::log1p(-q);
}

struct SupportWindow {
  i64 lo = 0;
  i64 hi = 0;
  double omitted = 0.0;  // pmf mass outside [lo, hi]
  bool truncated = false;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double rho3 = 0.0;  // E|X - mean|^3
  bool rho3_truncated = false;
};

// Discrete law on the non-negative integers. One of a closed set of families
// plus explicit finite support. Values are immutable after construction and
// all operations are pure. Parameters that were given exactly (as rationals)
// keep their exact form so that derived laws computed along different
// algebraic routes agree bit-for-bit.
class Distribution {
public:
  struct PointMass {
    i64 c;
  };
  struct Bernoulli {
    double p;
    std::optional<Rational> p_exact;
  };
  struct Binomial {
    i64 n;
    double p;
    std::optional<Rational> p_exact;
  };
  struct Poisson {
    double mu;
    std::optional<Rational> mu_exact;
  };
  struct Geometric {  // support N0, pmf(k) = (1-q)^k q
    double q;
    std::optional<Rational> q_exact;
  };
  struct NegativeBinomial {
    double r;
    double q;
    std::optional<Rational> r_exact;
    std::optional<Rational> q_exact;
  };
  struct ZeroInflatedPoisson {  // 0 w.p. pi0, else Poisson(lambda)
    double pi0;
    double lambda;
    std::optional<Rational> pi0_exact;
    std::optional<Rational> lambda_exact;
  };
  struct ZeroInflatedGeometric {  // Ber(1-p) * Geom(q): P(0) = p + (1-p)q
    double p;
    double q;
    std::optional<Rational> p_exact;
    std::optional<Rational> q_exact;
  };
  struct ScaledBernoulli {  // value s w.p. p, else 0
    i64 s;
    double p;
    std::optional<Rational> p_exact;
  };
  struct FiniteSupport {
    std::vector<i64> values;  // strictly increasing, non-negative
    std::vector<double> probs;
    std::optional<std::vector<Rational>> probs_exact;
  };

  using Variant = std::variant<PointMass, Bernoulli, Binomial, Poisson, Geometric,
                               NegativeBinomial, ZeroInflatedPoisson, ZeroInflatedGeometric,
                               ScaledBernoulli, FiniteSupport>;

  static Distribution point_mass(i64 c) {
    require(c >= 0, "point_mass: c must be >= 0");
    return Distribution(PointMass{c});
  }
  static Distribution bernoulli(double p) {
    require_prob(p, "bernoulli p");
    return Distribution(Bernoulli{p, std::nullopt});
  }
  static Distribution bernoulli(const Rational& p) {
    require_prob(p.to_double(), "bernoulli p");
    return Distribution(Bernoulli{p.to_double(), p});
  }
  static Distribution binomial(i64 n, double p) {
    require(n >= 1, "binomial: n must be >= 1");
    require_prob(p, "binomial p");
    return Distribution(Binomial{n, p, std::nullopt});
  }
  static Distribution binomial(i64 n, const Rational& p) {
    require(n >= 1, "binomial: n must be >= 1");
    require_prob(p.to_double(), "binomial p");
    return Distribution(Binomial{n, p.to_double(), p});
  }
  static Distribution poisson(double mu) {
    require(mu >= 0 && std::isfinite(mu), "poisson: mu must be >= 0");
    return Distribution(Poisson{mu, std::nullopt});
  }
  static Distribution poisson(const Rational& mu) {
    require(mu >= Rational(0), "poisson: mu must be >= 0");
    return Distribution(Poisson{mu.to_double(), mu});
  }
  static Distribution geometric(double q) {
    require(q > 0 && q < 1, "geometric: q must be in (0,1)");
    return Distribution(Geometric{q, std::nullopt});
  }
  static Distribution geometric(const Rational& q) {
    require(q > Rational(0) && q < Rational(1), "geometric: q must be in (0,1)");
    return Distribution(Geometric{q.to_double(), q});
  }
  static Distribution negative_binomial(double r, double q) {
    require(r > 0 && std::isfinite(r), "negative_binomial: r must be > 0");
    require(q > 0 && q < 1, "negative_binomial: q must be in (0,1)");
    return Distribution(NegativeBinomial{r, q, std::nullopt, std::nullopt});
  }
  static Distribution negative_binomial(const Rational& r, const Rational& q) {
    require(r > Rational(0), "negative_binomial: r must be > 0");
    require(q > Rational(0) && q < Rational(1), "negative_binomial: q must be in (0,1)");
    return Distribution(NegativeBinomial{r.to_double(), q.to_double(), r, q});
  }
  static Distribution zero_inflated_poisson(double pi0, double lambda) {
    require_prob(pi0, "zip pi0");
    require(lambda > 0 && std::isfinite(lambda), "zip: lambda must be > 0");
    return Distribution(ZeroInflatedPoisson{pi0, lambda, std::nullopt, std::nullopt});
  }
  static Distribution zero_inflated_poisson(const Rational& pi0, const Rational& lambda) {
    require_prob(pi0.to_double(), "zip pi0");
    require(lambda > Rational(0), "zip: lambda must be > 0");
    return Distribution(ZeroInflatedPoisson{pi0.to_double(), lambda.to_double(), pi0, lambda});
  }
  static Distribution zero_inflated_geometric(double p, double q) {
    require_prob(p, "zig p");
    require(q > 0 && q < 1, "zig: q must be in (0,1)");
    return Distribution(ZeroInflatedGeometric{p, q, std::nullopt, std::nullopt});
  }
  static Distribution zero_inflated_geometric(const Rational& p, const Rational& q) {
    require_prob(p.to_double(), "zig p");
    require(q > Rational(0) && q < Rational(1), "zig: q must be in (0,1)");
    return Distribution(ZeroInflatedGeometric{p.to_double(), q.to_double(), p, q});
  }
  static Distribution scaled_bernoulli(i64 s, double p) {
    require(s >= 1, "scaled_bernoulli: s must be >= 1");
    require_prob(p, "scaled_bernoulli p");
    return Distribution(ScaledBernoulli{s, p, std::nullopt});
  }
  static Distribution scaled_bernoulli(i64 s, const Rational& p) {
    require(s >= 1, "scaled_bernoulli: s must be >= 1");
    require_prob(p.to_double(), "scaled_bernoulli p");
    return Distribution(ScaledBernoulli{s, p.to_double(), p});
  }

  // Explicit finite support; probabilities must sum to 1 within 1e-12.
  static Distribution finite_support(std::vector<i64> values, std::vector<double> probs) {
    validate_finite(values, probs, 1e-12);
    return Distribution(FiniteSupport{std::move(values), std::move(probs), std::nullopt});
  }
  static Distribution finite_support(std::vector<i64> values, std::vector<Rational> probs) {
    std::vector<double> p(probs.size());
    Rational sum(0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      require(probs[i] >= Rational(0), "finite_support: negative probability");
      sum += probs[i];
      p[i] = probs[i].to_double();
    }
    require(sum == Rational(1), "finite_support: exact probabilities must sum to 1");
    validate_finite(values, p, 1e-9);
    return Distribution(FiniteSupport{std::move(values), std::move(p), std::move(probs)});
  }

  // Internal factory for convolution/compound results: allows the bounded
  // mass deficit produced by tail truncation.
  static Distribution finite_support_truncated(std::vector<i64> values, std::vector<double> probs,
                                               double deficit_tol) {
    validate_finite(values, probs, std::max(deficit_tol, 1e-12));
    return Distribution(FiniteSupport{std::move(values), std::move(probs), std::nullopt});
  }

  const Variant& value() const { return v_; }
  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

  std::string family_name() const;

  double pmf(i64 k) const;
  double log_pmf(i64 k) const;

  double mean() const;
  double variance() const;
  std::optional<Rational> mean_exact() const;
  std::optional<Rational> variance_exact() const;

  // Mean and variance analytic; rho3 summed over a truncated support with
  // omitted tail mass < tail_tol.
  Moments moments(double tail_tol = 1e-9) const;

  i64 support_min() const;
  std::optional<i64> support_max() const;  // nullopt when unbounded
  bool support_unbounded() const { return !support_max().has_value(); }

  // Smallest window [lo, hi] whose omitted mass is < tail_tol, with at most
  // tail_tol/2 dropped on each side. Throws SupportOverflowError past cap.
  SupportWindow truncated_support(double tail_tol, i64 cap = kDefaultSupportCap) const;

  // Upper bound on pmf(j+1)/pmf(j) over j >= k, for unbounded families.
  std::optional<double> tail_ratio_sup(i64 k) const;

  // One draw; consumes a variable number of uniforms from the stream.
  i64 sample(RngStream& stream) const;

private:
  explicit Distribution(Variant v) : v_(std::move(v)) {}

  static void require(bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
  }
  static void require_prob(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError(std::string(what) + " must be a probability in [0,1]");
  }
  static void validate_finite(const std::vector<i64>& values, const std::vector<double>& probs,
                              double sum_tol) {
    require(!values.empty() && values.size() == probs.size(),
            "finite_support: values/probs size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(values[i] >= 0, "finite_support: negative value");
      if (i > 0) require(values[i] > values[i - 1], "finite_support: values must be increasing");
      require(probs[i] >= 0.0, "finite_support: negative probability");
      sum += probs[i];
    }
    require(std::abs(sum - 1.0) <= sum_tol, "finite_support: probabilities must sum to 1");
  }

  Variant v_;
};

// ---------------------------------------------------------------------------
// pmf / moments

inline std::string Distribution::family_name() const {
  struct V {
    std::string operator()(const PointMass&) const { return "point_mass"; }
    std::string operator()(const Bernoulli&) const { return "bernoulli"; }
    std::string operator()(const Binomial&) const { return "binomial"; }
    std::string operator()(const Poisson&) const { return "poisson"; }
    std::string operator()(const Geometric&) const { return "geometric"; }
    std::string operator()(const NegativeBinomial&) const { return "nb"; }
    std::string operator()(const ZeroInflatedPoisson&) const { return "zip"; }
    std::string operator()(const ZeroInflatedGeometric&) const { return "zig"; }
    std::string operator()(const ScaledBernoulli&) const { return "scaled_bernoulli"; }
    std::string operator()(const FiniteSupport&) const { return "finite"; }
  };
  return std::visit(V{}, v_);
}

inline double Distribution::pmf(i64 k) const {
  if (k < 0) return 0.0;
  struct V {
    i64 k;
    double operator()(const PointMass& d) const { return k == d.c ? 1.0 : 0.0; }
    double operator()(const Bernoulli& d) const {
      return k == 0 ? 1.0 - d.p : (k == 1 ? d.p : 0.0);
    }
    double operator()(const Binomial& d) const {
      double lp = binomial_log_pmf(d.n, d.p, k);
      return lp == kNegInf ? 0.0 : std::exp(lp);
    }
    double operator()(const Poisson& d) const {
      double lp = poisson_log_pmf(d.mu, k);
      return lp == kNegInf ? 0.0 : std::exp(lp);
    }
    double operator()(const Geometric& d) const {
      return std::exp(static_cast<double>(k) * std::log1p(-d.q)) * d.q;
    }
    double operator()(const NegativeBinomial& d) const { return std::exp(nb_log_pmf(d.r, d.q, k)); }
    double operator()(const ZeroInflatedPoisson& d) const {
      double base = (1.0 - d.pi0) * std::exp(poisson_log_pmf(d.lambda, k));
      return k == 0 ? d.pi0 + base : base;
    }
    double operator()(const ZeroInflatedGeometric& d) const {
      if (k == 0) return d.p + (1.0 - d.p) * d.q;
      return (1.0 - d.p) * std::exp(static_cast<double>(k) * std::log1p(-d.q)) * d.q;
    }
    double operator()(const ScaledBernoulli& d) const {
      if (k == 0) return 1.0 - d.p;
      return k == d.s ? d.p : 0.0;
    }
    double operator()(const FiniteSupport& d) const {
      auto it = std::lower_bound(d.values.begin(), d.values.end(), k);
      if (it == d.values.end() || *it != k) return 0.0;
      return d.probs[static_cast<std::size_t>(it - d.values.begin())];
    }
  };
  return std::visit(V{k}, v_);
}

inline double Distribution::log_pmf(i64 k) const {
  if (k < 0) return kNegInf;
  if (const auto* d = get_if<Binomial>()) return binomial_log_pmf(d->n, d->p, k);
  if (const auto* d = get_if<Poisson>()) return poisson_log_pmf(d->mu, k);
  if (const auto* d = get_if<NegativeBinomial>()) return nb_log_pmf(d->r, d->q, k);
  if (const auto* d = get_if<Geometric>())
    return static_cast<double>(k) * std::log1p(-d->q) + std::log(d->q);
  double p = pmf(k);
  return p > 0.0 ? std::log(p) : kNegInf;
}

inline double Distribution::mean() const {
  struct V {
    double operator()(const Distribution::PointMass& d) const { return static_cast<double>(d.c); }
    double operator()(const Distribution::Bernoulli& d) const { return d.p; }
    double operator()(const Distribution::Binomial& d) const {
      return static_cast<double>(d.n) * d.p;
    }
    double operator()(const Distribution::Poisson& d) const { return d.mu; }
    double operator()(const Distribution::Geometric& d) const { return (1.0 - d.q) / d.q; }
    double operator()(const Distribution::NegativeBinomial& d) const {
      return d.r * (1.0 - d.q) / d.q;
    }
    double operator()(const Distribution::ZeroInflatedPoisson& d) const {
      return (1.0 - d.pi0) * d.lambda;
    }
    double operator()(const Distribution::ZeroInflatedGeometric& d) const {
      return (1.0 - d.p) * (1.0 - d.q) / d.q;
    }
    double operator()(const Distribution::ScaledBernoulli& d) const {
      return static_cast<double>(d.s) * d.p;
    }
    double operator()(const Distribution::FiniteSupport& d) const {
      double m = 0.0;
      for (std::size_t i = 0; i < d.values.size(); ++i)
        m += static_cast<double>(d.values[i]) * d.probs[i];
      return m;
    }
  };
  return std::visit(V{}, v_);
}

inline double Distribution::variance() const {
  struct V {
    double operator()(const Distribution::PointMass&) const { return 0.0; }
    double operator()(const Distribution::Bernoulli& d) const { return d.p * (1.0 - d.p); }
    double operator()(const Distribution::Binomial& d) const {
      return static_cast<double>(d.n) * d.p * (1.0 - d.p);
    }
    double operator()(const Distribution::Poisson& d) const { return d.mu; }
    double operator()(const Distribution::Geometric& d) const {
      return (1.0 - d.q) / (d.q * d.q);
    }
    double operator()(const Distribution::NegativeBinomial& d) const {
      return d.r * (1.0 - d.q) / (d.q * d.q);
    }
    double operator()(const Distribution::ZeroInflatedPoisson& d) const {
      double m = (1.0 - d.pi0) * d.lambda;
      double ex2 = (1.0 - d.pi0) * (d.lambda + d.lambda * d.lambda);
      return ex2 - m * m;
    }
    double operator()(const Distribution::ZeroInflatedGeometric& d) const {
      double m = (1.0 - d.p) * (1.0 - d.q) / d.q;
      double ex2 = (1.0 - d.p) * (1.0 - d.q) * (2.0 - d.q) / (d.q * d.q);
      return ex2 - m * m;
    }
    double operator()(const Distribution::ScaledBernoulli& d) const {
      return static_cast<double>(d.s) * static_cast<double>(d.s) * d.p * (1.0 - d.p);
    }
    double operator()(const Distribution::FiniteSupport& d) const {
      double m = 0.0, ex2 = 0.0;
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        double v = static_cast<double>(d.values[i]);
        m += v * d.probs[i];
        ex2 += v * v * d.probs[i];
      }
      return ex2 - m * m;
    }
  };
  return std::visit(V{}, v_);
}

inline std::optional<Rational> Distribution::mean_exact() const {
  try {
    if (const auto* d = get_if<PointMass>()) return Rational(d->c);
    if (const auto* d = get_if<Bernoulli>()) return d->p_exact;
    if (const auto* d = get_if<Binomial>()) {
      if (d->p_exact) return Rational(d->n) * *d->p_exact;
    }
    if (const auto* d = get_if<Poisson>()) return d->mu_exact;
    if (const auto* d = get_if<Geometric>()) {
      if (d->q_exact) return (Rational(1) - *d->q_exact) / *d->q_exact;
    }
    if (const auto* d = get_if<NegativeBinomial>()) {
      if (d->r_exact && d->q_exact) return *d->r_exact * (Rational(1) - *d->q_exact) / *d->q_exact;
    }
    if (const auto* d = get_if<ZeroInflatedPoisson>()) {
      if (d->pi0_exact && d->lambda_exact) return (Rational(1) - *d->pi0_exact) * *d->lambda_exact;
    }
    if (const auto* d = get_if<ZeroInflatedGeometric>()) {
      if (d->p_exact && d->q_exact)
        return (Rational(1) - *d->p_exact) * (Rational(1) - *d->q_exact) / *d->q_exact;
    }
    if (const auto* d = get_if<ScaledBernoulli>()) {
      if (d->p_exact) return Rational(d->s) * *d->p_exact;
    }
    if (const auto* d = get_if<FiniteSupport>()) {
      if (d->probs_exact) {
        Rational m(0);
        for (std::size_t i = 0; i < d->values.size(); ++i)
          m += Rational(d->values[i]) * (*d->probs_exact)[i];
        return m;
      }
    }
  } catch (const RationalOverflowError&) {
  }
  return std::nullopt;
}

inline std::optional<Rational> Distribution::variance_exact() const {
  try {
    if (get_if<PointMass>()) return Rational(0);
    if (const auto* d = get_if<Bernoulli>()) {
      if (d->p_exact) return *d->p_exact * (Rational(1) - *d->p_exact);
    }
    if (const auto* d = get_if<Binomial>()) {
      if (d->p_exact) return Rational(d->n) * *d->p_exact * (Rational(1) - *d->p_exact);
    }
    if (const auto* d = get_if<Poisson>()) return d->mu_exact;
    if (const auto* d = get_if<Geometric>()) {
      if (d->q_exact) return (Rational(1) - *d->q_exact) / (*d->q_exact * *d->q_exact);
    }
    if (const auto* d = get_if<NegativeBinomial>()) {
      if (d->r_exact && d->q_exact)
        return *d->r_exact * (Rational(1) - *d->q_exact) / (*d->q_exact * *d->q_exact);
    }
    if (const auto* d = get_if<ZeroInflatedPoisson>()) {
      if (d->pi0_exact && d->lambda_exact) {
        Rational one_m = Rational(1) - *d->pi0_exact;
        Rational m = one_m * *d->lambda_exact;
        Rational ex2 = one_m * (*d->lambda_exact + *d->lambda_exact * *d->lambda_exact);
        return ex2 - m * m;
      }
    }
    if (const auto* d = get_if<ZeroInflatedGeometric>()) {
      if (d->p_exact && d->q_exact) {
        Rational one_p = Rational(1) - *d->p_exact;
        Rational one_q = Rational(1) - *d->q_exact;
        Rational m = one_p * one_q / *d->q_exact;
        Rational ex2 = one_p * one_q * (Rational(2) - *d->q_exact) / (*d->q_exact * *d->q_exact);
        return ex2 - m * m;
      }
    }
    if (const auto* d = get_if<ScaledBernoulli>()) {
      if (d->p_exact)
        return Rational(d->s) * Rational(d->s) * *d->p_exact * (Rational(1) - *d->p_exact);
    }
    if (const auto* d = get_if<FiniteSupport>()) {
      if (d->probs_exact) {
        Rational m(0), ex2(0);
        for (std::size_t i = 0; i < d->values.size(); ++i) {
          Rational v(d->values[i]);
          m += v * (*d->probs_exact)[i];
          ex2 += v * v * (*d->probs_exact)[i];
        }
        return ex2 - m * m;
      }
    }
  } catch (const RationalOverflowError&) {
  }
  return std::nullopt;
}

inline i64 Distribution::support_min() const {
  if (const auto* d = get_if<PointMass>()) return d->c;
  if (const auto* d = get_if<FiniteSupport>()) return d->values.front();
  return 0;
}

inline std::optional<i64> Distribution::support_max() const {
  struct V {
    std::optional<i64> operator()(const Distribution::PointMass& d) const { return d.c; }
    std::optional<i64> operator()(const Distribution::Bernoulli& d) const {
      return d.p > 0.0 ? 1 : 0;
    }
    std::optional<i64> operator()(const Distribution::Binomial& d) const {
      return d.p > 0.0 ? d.n : 0;
    }
    std::optional<i64> operator()(const Distribution::Poisson& d) const {
      if (d.mu == 0.0) return 0;
      return std::nullopt;
    }
    std::optional<i64> operator()(const Distribution::Geometric&) const { return std::nullopt; }
    std::optional<i64> operator()(const Distribution::NegativeBinomial&) const {
      return std::nullopt;
    }
    std::optional<i64> operator()(const Distribution::ZeroInflatedPoisson& d) const {
      if (d.pi0 >= 1.0 || d.lambda == 0.0) return 0;
      return std::nullopt;
    }
    std::optional<i64> operator()(const Distribution::ZeroInflatedGeometric& d) const {
      if (d.p >= 1.0) return 0;
      return std::nullopt;
    }
    std::optional<i64> operator()(const Distribution::ScaledBernoulli& d) const {
      return d.p > 0.0 ? d.s : 0;
    }
    std::optional<i64> operator()(const Distribution::FiniteSupport& d) const {
      return d.values.back();
    }
  };
  return std::visit(V{}, v_);
}

inline std::optional<double> Distribution::tail_ratio_sup(i64 k) const {
  double kd = static_cast<double>(k);
  if (const auto* d = get_if<Poisson>()) return d->mu / (kd + 2.0);
  if (const auto* d = get_if<Geometric>()) return 1.0 - d->q;
  if (const auto* d = get_if<NegativeBinomial>()) {
    // ratio(j) = (j+r)(1-q)/(j+1): decreasing in j for r >= 1, else
    // increasing toward 1-q.
    if (d->r >= 1.0) return (kd + 1.0 + d->r) * (1.0 - d->q) / (kd + 2.0);
    return 1.0 - d->q;
  }
  if (const auto* d = get_if<ZeroInflatedPoisson>()) {
    if (k >= 1) return d->lambda / (kd + 2.0);
    return std::nullopt;
  }
  if (const auto* d = get_if<ZeroInflatedGeometric>()) {
    if (k >= 1) return 1.0 - d->q;
    return std::nullopt;
  }
  return std::nullopt;
}

inline SupportWindow Distribution::truncated_support(double tail_tol, i64 cap) const {
  SupportWindow w;
  auto mx = support_max();
  if (mx) {
    w.lo = support_min();
    w.hi = *mx;
    if (w.hi - w.lo + 1 > cap)
      throw SupportOverflowError("truncated_support: finite support exceeds cap");
    return w;
  }
  const double half = tail_tol / 2.0;
  double cum = 0.0;
  i64 lo = 0;
  double lead = 0.0;
  bool lo_fixed = false;
  i64 k = 0;
  for (;; ++k) {
    if (k > cap)
      throw SupportOverflowError("truncated_support: window exceeded cap " + std::to_string(cap));
    double p = pmf(k);
    if (!lo_fixed) {
      if (lead + p <= half) {
        lead += p;
        lo = k + 1;
      } else {
        lo_fixed = true;
      }
    }
    cum += p;
    if (cum >= 1.0 - half && k >= lo) break;
    // Fallback for when accumulated pmf rounding keeps `cum` short of the
    // target: stop once the analytic geometric tail bound is inside budget.
    if (k >= lo) {
      auto rho = tail_ratio_sup(k);
      if (rho && *rho < 1.0 && p * (*rho / (1.0 - *rho)) < half) break;
    }
  }
  w.lo = lo;
  w.hi = k;
  w.omitted = std::max(0.0, 1.0 - cum) + lead;
  w.truncated = true;
  return w;
}

inline Moments Distribution::moments(double tail_tol) const {
  if (!(tail_tol > 0 && tail_tol <= 1e-6))
    throw ValidationError("moments: tail_tol must be in (0, 1e-6]");
  Moments m;
  m.mean = mean();
  m.variance = variance();
  SupportWindow w = truncated_support(tail_tol);
  double rho = 0.0;
  for (i64 k = w.lo; k <= w.hi; ++k) {
    double d = static_cast<double>(k) - m.mean;
    rho += std::abs(d * d * d) * pmf(k);
  }
  m.rho3 = rho;
  m.rho3_truncated = w.truncated;
  return m;
}

// ---------------------------------------------------------------------------
// Sampling. All samplers are hand-rolled inversions or exact splits so that
// a (seed, stream, call-sequence) triple yields the same draws on every
// platform and worker count.

namespace detail {

inline i64 sample_binomial(i64 n, double p, RngStream& stream) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - sample_binomial(n, 1.0 - p, stream);
  // Splitting keeps the CDF walk's starting point (1-p)^n well above
  // double underflow.
  if (n > 256) {
    i64 half = n / 2;
    return sample_binomial(half, p, stream) + sample_binomial(n - half, p, stream);
  }
  double u = stream.next_double();
  double pk = std::pow(1.0 - p, static_cast<double>(n));
  double cum = pk;
  i64 k = 0;
  const double ratio = p / (1.0 - p);
  while (u >= cum && k < n) {
    pk *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
    ++k;
    cum += pk;
  }
  return k;
}

inline i64 sample_poisson(double mu, RngStream& stream) {
  if (mu <= 0.0) return 0;
  if (mu > 60.0) {
    // Poisson additivity: split the rate until the CDF walk is safe.
    double half = mu / 2.0;
    return sample_poisson(half, stream) + sample_poisson(mu - half, stream);
  }
  double u = stream.next_double();
  double pk = std::exp(-mu);
  double cum = pk;
  i64 k = 0;
  while (u >= cum) {
    ++k;
    pk *= mu / static_cast<double>(k);
    cum += pk;
    if (k > 2000) break;  // u in the far tail of the truncated walk
  }
  return k;
}

inline i64 sample_geometric(double q, RngStream& stream) {
  double u = stream.next_double();
  // P(G >= k) = (1-q)^k; invert the survival function.
  return static_cast<i64>(std::floor(std::log1p(-u) / std::log1p(-q)));
}

inline i64 sample_negative_binomial(double r, double q, RngStream& stream) {
  if (r * std::log(q) < -700.0) {
    double half = r / 2.0;
    return sample_negative_binomial(half, q, stream) +
           sample_negative_binomial(r - half, q, stream);
  }
  double u = stream.next_double();
  double pk = std::exp(r * std::log(q));
  double cum = pk;
  i64 k = 0;
  while (u >= cum) {
    pk *= (static_cast<double>(k) + r) * (1.0 - q) / (static_cast<double>(k) + 1.0);
    ++k;
    cum += pk;
    if (k > 100000000) break;
  }
  return k;
}

}  // namespace detail

inline i64 Distribution::sample(RngStream& stream) const {
  struct V {
    RngStream& s;
    i64 operator()(const Distribution::PointMass& d) const { return d.c; }
    i64 operator()(const Distribution::Bernoulli& d) const {
      return s.next_double() < d.p ? 1 : 0;
    }
    i64 operator()(const Distribution::Binomial& d) const {
      return detail::sample_binomial(d.n, d.p, s);
    }
    i64 operator()(const Distribution::Poisson& d) const { return detail::sample_poisson(d.mu, s); }
    i64 operator()(const Distribution::Geometric& d) const {
      return detail::sample_geometric(d.q, s);
    }
    i64 operator()(const Distribution::NegativeBinomial& d) const {
      return detail::sample_negative_binomial(d.r, d.q, s);
    }
    i64 operator()(const Distribution::ZeroInflatedPoisson& d) const {
      if (s.next_double() < d.pi0) return 0;
      return detail::sample_poisson(d.lambda, s);
    }
    i64 operator()(const Distribution::ZeroInflatedGeometric& d) const {
      if (s.next_double() < d.p) return 0;
      return detail::sample_geometric(d.q, s);
    }
    i64 operator()(const Distribution::ScaledBernoulli& d) const {
      return s.next_double() < d.p ? d.s : 0;
    }
    i64 operator()(const Distribution::FiniteSupport& d) const {
      double u = s.next_double();
      double cum = 0.0;
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        cum += d.probs[i];
        if (u < cum) return d.values[i];
      }
      return d.values.back();
    }
  };
  return std::visit(V{stream}, v_);
}

}  // namespace bplink
