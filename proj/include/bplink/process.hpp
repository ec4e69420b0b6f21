#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "bplink/control.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/rational.hpp"

namespace bplink {

// z-indexed offspring law of a PSDBP. Families from a closed catalog plus
// tabulated and synthesized entries; exact rational moments are exposed where
// the family parameters are rational.
class OffspringFamily {
public:
  virtual ~OffspringFamily() = default;

  virtual Distribution offspring(i64 z) const = 0;

  virtual std::optional<Rational> mean_exact(i64 z) const { return offspring(z).mean_exact(); }
  virtual std::optional<Rational> variance_exact(i64 z) const {
    return offspring(z).variance_exact();
  }

  virtual std::string name() const = 0;
  virtual std::string describe() const = 0;
};

using OffspringFamilyPtr = std::shared_ptr<const OffspringFamily>;

// Bin(2, K/(K+z)) offspring: conditional mean 2Kz/(K+z), the Beverton-Holt
// model with carrying capacity K.
class BinomialBhFamily final : public OffspringFamily {
public:
  explicit BinomialBhFamily(Rational K) : K_(std::move(K)) {
    if (K_ <= Rational(0)) throw ValidationError("binomial_bh: K must be > 0");
  }
  Distribution offspring(i64 z) const override {
    return Distribution::binomial(2, K_ / (K_ + Rational(z)));
  }
  std::string name() const override { return "binomial_bh"; }
  std::string describe() const override { return "binomial_bh(K=" + K_.str() + ")"; }
  const Rational& K() const { return K_; }

private:
  Rational K_;
};

// Poi((z-1) lambda / z) offspring; at z = 0 the state is absorbing.
class PoissonScaledFamily final : public OffspringFamily {
public:
  explicit PoissonScaledFamily(Rational lambda) : lambda_(std::move(lambda)) {
    if (lambda_ <= Rational(0)) throw ValidationError("poisson_scaled: lambda must be > 0");
  }
  Distribution offspring(i64 z) const override {
    if (z <= 0) return Distribution::point_mass(0);
    return Distribution::poisson(Rational(z - 1) * lambda_ / Rational(z));
  }
  std::string name() const override { return "poisson_scaled"; }
  std::string describe() const override { return "poisson_scaled(lambda=" + lambda_.str() + ")"; }
  const Rational& lambda() const { return lambda_; }

private:
  Rational lambda_;
};

// NB offspring with carrying capacity at K, moment-matched to the
// binomial-control/Poisson CBP with the same (lambda, M, K).
class NbCarryingCapacityFamily final : public OffspringFamily {
public:
  NbCarryingCapacityFamily(Rational lambda, i64 M, Rational K)
      : lambda_(std::move(lambda)), M_(M), K_(std::move(K)) {
    if (lambda_ < Rational(2)) throw ValidationError("nb_cc: lambda must be >= 2");
    if (M_ < 1) throw ValidationError("nb_cc: M must be >= 1");
    if (!(Rational(M_) < K_)) throw ValidationError("nb_cc: M < K required");
  }
  Distribution offspring(i64 z) const override {
    if (z <= 0) return Distribution::point_mass(0);
    Rational zr(z);
    Rational KM = K_ + Rational(M_);
    Rational denom = lambda_ * KM * zr + lambda_ * K_ * Rational(M_) +
                     (lambda_ - Rational(2)) * K_ * K_;
    Rational r = Rational(2) * K_ * K_ * (zr + Rational(M_)) / (zr * denom);
    Rational q = (zr + K_) * KM / ((Rational(1) + lambda_) * KM * (K_ + zr) - Rational(2) * K_ * K_);
    return Distribution::negative_binomial(r, q);
  }
  std::string name() const override { return "nb_cc"; }
  std::string describe() const override {
    return "nb_cc(lambda=" + lambda_.str() + ",M=" + std::to_string(M_) + ",K=" + K_.str() + ")";
  }
  const Rational& lambda() const { return lambda_; }
  i64 M() const { return M_; }
  const Rational& K() const { return K_; }

private:
  Rational lambda_;
  i64 M_;
  Rational K_;
};

// NB((z+M)/((lambda-1) z), 1/lambda) offspring: moment-matched to the
// shift-gated DCBP with zero-inflated-Poisson offspring (equivalently, to
// the Bin((z+M) 1{z>0}, 1/lambda)-control CBP with Poi(lambda) offspring).
class NbShiftMatchedFamily final : public OffspringFamily {
public:
  NbShiftMatchedFamily(Rational lambda, i64 M) : lambda_(std::move(lambda)), M_(M) {
    if (lambda_ < Rational(2)) throw ValidationError("nb_matched: lambda must be >= 2");
    if (M_ < 1) throw ValidationError("nb_matched: M must be >= 1");
  }
  Distribution offspring(i64 z) const override {
    if (z <= 0) return Distribution::point_mass(0);
    Rational r = Rational(z + M_) / ((lambda_ - Rational(1)) * Rational(z));
    return Distribution::negative_binomial(r, Rational(1) / lambda_);
  }
  std::string name() const override { return "nb_matched"; }
  std::string describe() const override {
    return "nb_matched(lambda=" + lambda_.str() + ",M=" + std::to_string(M_) + ")";
  }
  const Rational& lambda() const { return lambda_; }
  i64 M() const { return M_; }

private:
  Rational lambda_;
  i64 M_;
};

// Three-point offspring on {0,1,2} with mean (z-1)/z and variance (z-1)/(2z)
// for z >= 2; zero offspring at z in {0,1}. Matches the max-shift DCBP with
// Bin(2, 1/2) offspring.
class ThreePointMatchedFamily final : public OffspringFamily {
public:
  Distribution offspring(i64 z) const override {
    if (z <= 1) return Distribution::point_mass(0);
    Rational z2(z * z);
    Rational p0 = (z2 + Rational(z) + Rational(2)) / (Rational(4) * z2);
    Rational p1 = (z2 + Rational(z) - Rational(2)) / (Rational(2) * z2);
    Rational p2 = (z2 - Rational(3 * z) + Rational(2)) / (Rational(4) * z2);
    if (z == 2) return Distribution::finite_support({0, 1}, std::vector<Rational>{p0, p1});
    return Distribution::finite_support({0, 1, 2}, std::vector<Rational>{p0, p1, p2});
  }
  std::string name() const override { return "three_point_matched"; }
  std::string describe() const override { return "three_point_matched"; }
};

// Poi(r^(1 - z/K)) offspring: one representative of the Ricker mean model
// z r^(1 - z/K), which pins down no unique offspring law.
class PoissonRickerFamily final : public OffspringFamily {
public:
  PoissonRickerFamily(double r, double K) : r_(r), K_(K) {
    if (!(r > 1.0)) throw ValidationError("poisson_ricker: r must be > 1");
    if (!(K > 0.0)) throw ValidationError("poisson_ricker: K must be > 0");
  }
  Distribution offspring(i64 z) const override {
    double mu = std::pow(r_, 1.0 - static_cast<double>(z) / K_);
    return Distribution::poisson(mu);
  }
  std::optional<Rational> mean_exact(i64) const override { return std::nullopt; }
  std::optional<Rational> variance_exact(i64) const override { return std::nullopt; }
  std::string name() const override { return "poisson_ricker"; }
  std::string describe() const override {
    return "poisson_ricker(r=" + std::to_string(r_) + ",K=" + std::to_string(K_) + ")";
  }

private:
  double r_;
  double K_;
};

// The same offspring law at every population size (a Galton-Watson process).
class ConstantOffspringFamily final : public OffspringFamily {
public:
  explicit ConstantOffspringFamily(Distribution d, std::string described = "")
      : d_(std::move(d)), described_(std::move(described)) {}
  Distribution offspring(i64) const override { return d_; }
  std::string name() const override { return "constant"; }
  std::string describe() const override {
    return described_.empty() ? "constant" : "constant(offspring=" + described_ + ")";
  }
  const Distribution& law() const { return d_; }

private:
  Distribution d_;
  std::string described_;
};

// Explicit per-z laws with an optional fallback for uncovered states.
class TabulatedFamily final : public OffspringFamily {
public:
  explicit TabulatedFamily(std::map<i64, Distribution> laws,
                           std::optional<Distribution> fallback = std::nullopt)
      : laws_(std::move(laws)), fallback_(std::move(fallback)) {
    if (laws_.empty()) throw ValidationError("tabulated: no laws given");
  }
  Distribution offspring(i64 z) const override {
    auto it = laws_.find(z);
    if (it != laws_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw ValidationError("tabulated: no law for state " + std::to_string(z));
  }
  std::string name() const override { return "tabulated"; }
  std::string describe() const override {
    return "tabulated(" + std::to_string(laws_.size()) + " states)";
  }

private:
  std::map<i64, Distribution> laws_;
  std::optional<Distribution> fallback_;
};

// Offspring defined by a rule applied per state (used for constructed
// equivalents and moment-matched families). Laws are memoized; the cache is
// safe for concurrent use and purely an optimization.
class SynthesizedFamily final : public OffspringFamily {
public:
  SynthesizedFamily(std::function<Distribution(i64)> rule, std::string name, std::string described)
      : rule_(std::move(rule)), name_(std::move(name)), described_(std::move(described)) {}

  Distribution offspring(i64 z) const override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(z);
      if (it != cache_.end()) return it->second;
    }
    Distribution law = rule_(z);
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(z, law);
    (void)inserted;
    return it->second;
  }
  std::string name() const override { return name_; }
  std::string describe() const override { return described_; }

private:
  std::function<Distribution(i64)> rule_;
  std::string name_;
  std::string described_;
  mutable std::mutex mu_;
  mutable std::map<i64, Distribution> cache_;
};

// ---------------------------------------------------------------------------

struct PsdbpSpec {
  OffspringFamilyPtr family;
};

struct CbpSpec {
  ControlSpec control;
  Distribution offspring;
};

using ProcessSpec = std::variant<PsdbpSpec, CbpSpec>;

inline bool is_psdbp(const ProcessSpec& s) { return std::holds_alternative<PsdbpSpec>(s); }
inline bool is_cbp(const ProcessSpec& s) { return std::holds_alternative<CbpSpec>(s); }
inline bool is_dcbp(const ProcessSpec& s) {
  const auto* c = std::get_if<CbpSpec>(&s);
  return c != nullptr && is_deterministic(c->control);
}

}  // namespace bplink
