#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bplink/common.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/rational.hpp"

namespace bplink {

// ---------------------------------------------------------------------------
// Deterministic integer maps z -> N0, used both as deterministic control
// functions phi and as the psi parameter of random control families.

struct ControlMap {
  struct Identity {};
  struct AffineFloor {  // max(0, floor(a z + b))
    Rational a;
    Rational b;
  };
  struct MaxShift {  // max(z - c, 0)
    i64 c;
  };
  struct ShiftGated {  // (z + M) * 1{z > 0}
    i64 M;
  };
  struct ParityHalf {};  // z if z odd, z/2 if z even
  struct Table {         // explicit overrides plus a default rule beyond them
    std::map<i64, i64> values;
    enum class Fallback { identity, zero } fallback = Fallback::identity;
  };

  using Variant = std::variant<Identity, AffineFloor, MaxShift, ShiftGated, ParityHalf, Table>;
  Variant v;

  static ControlMap identity() { return {Identity{}}; }
  static ControlMap affine_floor(Rational a, Rational b) {
    if (a <= Rational(0)) throw ValidationError("affine_floor: a must be > 0");
    return {AffineFloor{a, b}};
  }
  static ControlMap max_shift(i64 c) {
    if (c < 1) throw ValidationError("max_shift: c must be >= 1");
    return {MaxShift{c}};
  }
  static ControlMap shift_gated(i64 M) {
    if (M < 0) throw ValidationError("shift_gated: M must be >= 0");
    return {ShiftGated{M}};
  }
  static ControlMap parity_half() { return {ParityHalf{}}; }
  static ControlMap table(std::map<i64, i64> values,
                          Table::Fallback fallback = Table::Fallback::identity) {
    for (const auto& [z, v_] : values)
      if (z < 0 || v_ < 0) throw ValidationError("table: entries must be non-negative");
    return {Table{std::move(values), fallback}};
  }

  i64 operator()(i64 z) const {
    struct V {
      i64 z;
      i64 operator()(const Identity&) const { return z; }
      i64 operator()(const AffineFloor& m) const {
        Rational val = m.a * Rational(z) + m.b;
        return std::max<i64>(val.floor(), 0);
      }
      i64 operator()(const MaxShift& m) const { return std::max<i64>(z - m.c, 0); }
      i64 operator()(const ShiftGated& m) const { return z > 0 ? z + m.M : 0; }
      i64 operator()(const ParityHalf&) const { return z % 2 == 1 ? z : z / 2; }
      i64 operator()(const Table& m) const {
        auto it = m.values.find(z);
        if (it != m.values.end()) return it->second;
        return m.fallback == Table::Fallback::identity ? z : 0;
      }
    };
    return std::visit(V{z}, v);
  }

  // inf over x >= 1 of map(x)/x, when known analytically.
  std::optional<double> analytic_lower_slope() const {
    if (std::holds_alternative<Identity>(v)) return 1.0;
    if (const auto* m = std::get_if<AffineFloor>(&v)) {
      if (m->b >= Rational(0) && m->a.is_integer()) return m->a.to_double();
      return std::nullopt;
    }
    if (std::holds_alternative<MaxShift>(v)) return 0.0;  // map(x) = 0 for x <= c
    if (const auto* m = std::get_if<ShiftGated>(&v)) {
      (void)m;
      return 1.0;  // (x + M)/x >= 1, infimum 1
    }
    if (std::holds_alternative<ParityHalf>(v)) return 0.5;
    return std::nullopt;
  }

  // Whether map(x) >= 1 for every x >= 1, when known analytically.
  std::optional<bool> analytic_positive_on_positive() const {
    if (std::holds_alternative<Identity>(v)) return true;
    if (const auto* m = std::get_if<AffineFloor>(&v)) {
      if (m->a >= Rational(1) && m->b >= Rational(0)) return true;
      return std::nullopt;
    }
    if (std::holds_alternative<MaxShift>(v)) return false;
    if (std::holds_alternative<ShiftGated>(v)) return true;
    if (std::holds_alternative<ParityHalf>(v)) return true;
    return std::nullopt;
  }

  // Whether z divides map(z) for every z >= 1, when known analytically.
  std::optional<bool> analytic_multiple_of_argument() const {
    if (std::holds_alternative<Identity>(v)) return true;
    if (const auto* m = std::get_if<AffineFloor>(&v)) {
      if (m->a.is_integer() && m->b == Rational(0)) return true;
      return std::nullopt;
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// z-indexed rates from a closed named catalog (no expression interpreter, so
// configs stay bit-reproducible).

struct RateRef {
  struct Const {
    double v;
    std::optional<Rational> exact;
  };
  struct BevertonHolt {  // K / (K + z)
    Rational K;
  };
  struct Ex415 {  // 2K^2 / (lambda (K+M) (z+K))
    Rational K;
    i64 M;
    Rational lambda;
  };
  struct ExpGate {  // exp(-z / scale)
    double scale;
  };

  using Variant = std::variant<Const, BevertonHolt, Ex415, ExpGate>;
  Variant v;

  static RateRef constant(double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("rate const: must be in [0,1]");
    return {Const{value, std::nullopt}};
  }
  static RateRef constant(const Rational& value) {
    if (!(value >= Rational(0) && value <= Rational(1)))
      throw ValidationError("rate const: must be in [0,1]");
    return {Const{value.to_double(), value}};
  }
  static RateRef beverton_holt(Rational K) {
    if (K <= Rational(0)) throw ValidationError("bh rate: K must be > 0");
    return {BevertonHolt{K}};
  }
  static RateRef ex415(Rational K, i64 M, Rational lambda) {
    if (K <= Rational(0) || M < 1 || lambda < Rational(2))
      throw ValidationError("ex415 rate: requires K > 0, M >= 1, lambda >= 2");
    if (!(Rational(M) < K)) throw ValidationError("ex415 rate: requires M < K");
    return {Ex415{K, M, lambda}};
  }
  static RateRef exp_gate(double scale) {
    if (!(scale > 0)) throw ValidationError("exp_gate: scale must be > 0");
    return {ExpGate{scale}};
  }

  double operator()(i64 z) const {
    struct V {
      i64 z;
      double operator()(const Const& r) const { return r.v; }
      double operator()(const BevertonHolt& r) const {
        return (r.K / (r.K + Rational(z))).to_double();
      }
      double operator()(const Ex415& r) const {
        return (Rational(2) * r.K * r.K / (r.lambda * (r.K + Rational(r.M)) * (Rational(z) + r.K)))
            .to_double();
      }
      double operator()(const ExpGate& r) const {
        return std::exp(-static_cast<double>(z) / r.scale);
      }
    };
    return std::visit(V{z}, v);
  }

  std::optional<Rational> exact(i64 z) const {
    try {
      if (const auto* r = std::get_if<Const>(&v)) return r->exact;
      if (const auto* r = std::get_if<BevertonHolt>(&v)) return r->K / (r->K + Rational(z));
      if (const auto* r = std::get_if<Ex415>(&v))
        return Rational(2) * r->K * r->K /
               (r->lambda * (r->K + Rational(r->M)) * (Rational(z) + r->K));
    } catch (const RationalOverflowError&) {
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Control specification: phi-tilde as either a deterministic map or one of
// the named random families.

struct DeterministicControl {
  ControlMap map;
};
struct PoissonControl {  // phi(z) ~ Poi(psi(z))
  ControlMap psi;
};
struct BinomialControl {  // phi(z) ~ Bin(psi(z), q(z))
  ControlMap psi;
  RateRef q;
};
struct NegBinControl {  // phi(z) ~ NB(psi(z), q)
  ControlMap psi;
  RateRef q;
};
struct ScaledBernoulliControl {  // phi(z) = scale(z) * Ber(p(z))
  ControlMap scale;
  RateRef p;
};

using ControlSpec = std::variant<DeterministicControl, PoissonControl, BinomialControl,
                                 NegBinControl, ScaledBernoulliControl>;

inline bool is_deterministic(const ControlSpec& c) {
  return std::holds_alternative<DeterministicControl>(c);
}

// Law of phi-tilde(z).
inline Distribution control_law(const ControlSpec& c, i64 z) {
  struct V {
    i64 z;
    Distribution operator()(const DeterministicControl& s) const {
      return Distribution::point_mass(s.map(z));
    }
    Distribution operator()(const PoissonControl& s) const {
      return Distribution::poisson(Rational(s.psi(z)));
    }
    Distribution operator()(const BinomialControl& s) const {
      i64 n = s.psi(z);
      if (n == 0) return Distribution::point_mass(0);
      double q = s.q(z);
      if (q <= 0.0) return Distribution::point_mass(0);
      if (q >= 1.0) return Distribution::point_mass(n);
      if (auto e = s.q.exact(z)) return Distribution::binomial(n, *e);
      return Distribution::binomial(n, q);
    }
    Distribution operator()(const NegBinControl& s) const {
      i64 n = s.psi(z);
      if (n == 0) return Distribution::point_mass(0);
      double q = s.q(z);
      if (q >= 1.0) return Distribution::point_mass(0);
      if (q <= 0.0) throw ValidationError("negbin control: q must be > 0");
      if (auto e = s.q.exact(z)) return Distribution::negative_binomial(Rational(n), *e);
      return Distribution::negative_binomial(static_cast<double>(n), q);
    }
    Distribution operator()(const ScaledBernoulliControl& s) const {
      i64 scale = s.scale(z);
      double p = s.p(z);
      if (scale == 0 || p <= 0.0) return Distribution::point_mass(0);
      if (p >= 1.0) return Distribution::point_mass(scale);
      if (auto e = s.p.exact(z)) return Distribution::scaled_bernoulli(scale, *e);
      return Distribution::scaled_bernoulli(scale, p);
    }
  };
  return std::visit(V{z}, c);
}

// P(phi-tilde(0) = 0) < 1, i.e. the process can leave state zero.
inline bool allows_immigration_at_zero(const ControlSpec& c) {
  Distribution at0 = control_law(c, 0);
  return at0.pmf(0) < 1.0;
}

struct ControlMoments {
  double mean;
  double variance;
  std::optional<Rational> mean_exact;
  std::optional<Rational> variance_exact;
};

inline ControlMoments control_moments(const ControlSpec& c, i64 z) {
  Distribution law = control_law(c, z);
  return {law.mean(), law.variance(), law.mean_exact(), law.variance_exact()};
}

}  // namespace bplink
