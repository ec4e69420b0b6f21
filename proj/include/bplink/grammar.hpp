#pragma once

#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bplink/control.hpp"
#include "bplink/distribution.hpp"
#include "bplink/errors.hpp"
#include "bplink/rational.hpp"

namespace bplink {

// Structured-text forms for distributions, control maps and rates:
//   poisson(mu=3), nb(r=3/2,q=1/3), finite{0:1/4,2:3/4}
//   shift_gated(M=2), affine(a=2,b=0), table{1:3,2:0}, table_zero{...}
//   const(v=1/3), bh(K=100), ex415(K=100,M=2,lambda=3), exp_gate(scale=1000)
// Numbers are integers, plain decimals or fractions; all three parse to
// exact rationals.

struct NumberValue {
  double value = 0.0;
  std::optional<Rational> exact;
};

inline NumberValue parse_number(std::string_view s) {
  if (auto r = Rational::parse(s)) return {r->to_double(), r};
  try {
    std::size_t pos = 0;
    double d = std::stod(std::string(s), &pos);
    if (pos == s.size()) return {d, std::nullopt};
  } catch (...) {
  }
  throw ParseError("not a number: '" + std::string(s) + "'");
}

inline std::string format_number(double v, const std::optional<Rational>& exact) {
  if (exact) return exact->str();
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail_grammar {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits on `sep` at depth zero w.r.t. () and {}.
inline std::vector<std::string_view> split_top(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '{') ++depth;
    if (c == ')' || c == '}') --depth;
    if (c == sep && depth == 0) {
      out.push_back(strip(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (start <= s.size()) {
    auto last = strip(s.substr(start));
    if (!last.empty() || !out.empty()) out.push_back(last);
  }
  return out;
}

struct Call {
  std::string name;
  std::vector<std::pair<std::string, std::string>> args;  // name(k=v,...)
  std::vector<std::pair<std::string, std::string>> items; // name{k:v,...}
};

inline Call parse_call(std::string_view s) {
  s = strip(s);
  Call out;
  std::size_t p = s.find_first_of("({");
  if (p == std::string_view::npos) {
    out.name = std::string(s);
    return out;
  }
  out.name = std::string(strip(s.substr(0, p)));
  char open = s[p];
  char close = open == '(' ? ')' : '}';
  if (s.back() != close) throw ParseError("expected '" + std::string(1, close) + "' at end of '" +
                                          std::string(s) + "'");
  std::string_view body = s.substr(p + 1, s.size() - p - 2);
  for (std::string_view part : split_top(body, ',')) {
    if (part.empty()) continue;
    char delim = open == '(' ? '=' : ':';
    std::size_t q = std::string_view::npos;
    int depth = 0;
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (part[i] == '(' || part[i] == '{') ++depth;
      if (part[i] == ')' || part[i] == '}') --depth;
      if (part[i] == delim && depth == 0) {
        q = i;
        break;
      }
    }
    if (q == std::string_view::npos)
      throw ParseError("expected '" + std::string(1, delim) + "' in '" + std::string(part) + "'");
    auto key = std::string(strip(part.substr(0, q)));
    auto value = std::string(strip(part.substr(q + 1)));
    if (open == '(')
      out.args.emplace_back(std::move(key), std::move(value));
    else
      out.items.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::string arg(const Call& c, const std::string& key) {
  for (const auto& [k, v] : c.args)
    if (k == key) return v;
  throw ParseError("missing argument '" + key + "' in '" + c.name + "(...)'");
}

inline NumberValue num_arg(const Call& c, const std::string& key) {
  return parse_number(arg(c, key));
}

inline i64 int_arg(const Call& c, const std::string& key) {
  NumberValue n = num_arg(c, key);
  if (!n.exact || !n.exact->is_integer())
    throw ParseError("argument '" + key + "' must be an integer in '" + c.name + "(...)'");
  return n.exact->num();
}

inline Rational rational_arg(const Call& c, const std::string& key) {
  NumberValue n = num_arg(c, key);
  if (!n.exact) throw ParseError("argument '" + key + "' must be rational in '" + c.name + "(...)'");
  return *n.exact;
}

}  // namespace detail_grammar

// ---------------------------------------------------------------------------
// Distributions

inline Distribution parse_distribution(std::string_view text) {
  using namespace detail_grammar;
  Call c = parse_call(text);
  auto num = [&](const char* k) { return num_arg(c, k); };
  auto make1 = [&](const char* k, auto&& exact_fn, auto&& double_fn) {
    NumberValue n = num(k);
    return n.exact ? exact_fn(*n.exact) : double_fn(n.value);
  };
  if (c.name == "point_mass") return Distribution::point_mass(int_arg(c, "c"));
  if (c.name == "bernoulli")
    return make1(
        "p", [](const Rational& r) { return Distribution::bernoulli(r); },
        [](double d) { return Distribution::bernoulli(d); });
  if (c.name == "binomial") {
    i64 n = int_arg(c, "n");
    NumberValue p = num("p");
    return p.exact ? Distribution::binomial(n, *p.exact) : Distribution::binomial(n, p.value);
  }
  if (c.name == "poisson")
    return make1(
        "mu", [](const Rational& r) { return Distribution::poisson(r); },
        [](double d) { return Distribution::poisson(d); });
  if (c.name == "geometric")
    return make1(
        "q", [](const Rational& r) { return Distribution::geometric(r); },
        [](double d) { return Distribution::geometric(d); });
  if (c.name == "nb") {
    NumberValue r = num("r"), q = num("q");
    if (r.exact && q.exact) return Distribution::negative_binomial(*r.exact, *q.exact);
    return Distribution::negative_binomial(r.value, q.value);
  }
  if (c.name == "zip") {
    NumberValue pi0 = num("pi0"), lambda = num("lambda");
    if (pi0.exact && lambda.exact)
      return Distribution::zero_inflated_poisson(*pi0.exact, *lambda.exact);
    return Distribution::zero_inflated_poisson(pi0.value, lambda.value);
  }
  if (c.name == "zig") {
    NumberValue p = num("p"), q = num("q");
    if (p.exact && q.exact) return Distribution::zero_inflated_geometric(*p.exact, *q.exact);
    return Distribution::zero_inflated_geometric(p.value, q.value);
  }
  if (c.name == "scaled_bernoulli") {
    i64 s = int_arg(c, "s");
    NumberValue p = num("p");
    return p.exact ? Distribution::scaled_bernoulli(s, *p.exact)
                   : Distribution::scaled_bernoulli(s, p.value);
  }
  if (c.name == "finite") {
    std::vector<i64> values;
    std::vector<double> probs;
    std::vector<Rational> probs_exact;
    bool all_exact = true;
    for (const auto& [k, v] : c.items) {
      NumberValue kv = parse_number(k);
      if (!kv.exact || !kv.exact->is_integer()) throw ParseError("finite: values must be integers");
      values.push_back(kv.exact->num());
      NumberValue pv = parse_number(v);
      probs.push_back(pv.value);
      if (pv.exact)
        probs_exact.push_back(*pv.exact);
      else
        all_exact = false;
    }
    if (all_exact) {
      try {
        return Distribution::finite_support(values, probs_exact);
      } catch (const ValidationError&) {
        // fall through to the double form (e.g. probabilities summing to 1
        // only approximately)
      }
    }
    return Distribution::finite_support(std::move(values), std::move(probs));
  }
  throw ParseError("unknown distribution '" + c.name + "'");
}

inline std::string format_distribution(const Distribution& d) {
  using FS = Distribution::FiniteSupport;
  if (const auto* x = d.get_if<Distribution::PointMass>())
    return "point_mass(c=" + std::to_string(x->c) + ")";
  if (const auto* x = d.get_if<Distribution::Bernoulli>())
    return "bernoulli(p=" + format_number(x->p, x->p_exact) + ")";
  if (const auto* x = d.get_if<Distribution::Binomial>())
    return "binomial(n=" + std::to_string(x->n) + ",p=" + format_number(x->p, x->p_exact) + ")";
  if (const auto* x = d.get_if<Distribution::Poisson>())
    return "poisson(mu=" + format_number(x->mu, x->mu_exact) + ")";
  if (const auto* x = d.get_if<Distribution::Geometric>())
    return "geometric(q=" + format_number(x->q, x->q_exact) + ")";
  if (const auto* x = d.get_if<Distribution::NegativeBinomial>())
    return "nb(r=" + format_number(x->r, x->r_exact) + ",q=" + format_number(x->q, x->q_exact) +
           ")";
  if (const auto* x = d.get_if<Distribution::ZeroInflatedPoisson>())
    return "zip(pi0=" + format_number(x->pi0, x->pi0_exact) +
           ",lambda=" + format_number(x->lambda, x->lambda_exact) + ")";
  if (const auto* x = d.get_if<Distribution::ZeroInflatedGeometric>())
    return "zig(p=" + format_number(x->p, x->p_exact) + ",q=" + format_number(x->q, x->q_exact) +
           ")";
  if (const auto* x = d.get_if<Distribution::ScaledBernoulli>())
    return "scaled_bernoulli(s=" + std::to_string(x->s) +
           ",p=" + format_number(x->p, x->p_exact) + ")";
  const auto* f = d.get_if<FS>();
  std::string out = "finite{";
  for (std::size_t i = 0; i < f->values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(f->values[i]) + ":";
    out += format_number(f->probs[i],
                         f->probs_exact ? std::optional<Rational>((*f->probs_exact)[i])
                                        : std::nullopt);
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Control maps

inline ControlMap parse_control_map(std::string_view text) {
  using namespace detail_grammar;
  Call c = parse_call(text);
  if (c.name == "identity") return ControlMap::identity();
  if (c.name == "affine")
    return ControlMap::affine_floor(rational_arg(c, "a"), rational_arg(c, "b"));
  if (c.name == "max_shift") return ControlMap::max_shift(int_arg(c, "c"));
  if (c.name == "shift_gated") return ControlMap::shift_gated(int_arg(c, "M"));
  if (c.name == "parity_half") return ControlMap::parity_half();
  if (c.name == "table" || c.name == "table_zero") {
    std::map<i64, i64> entries;
    for (const auto& [k, v] : c.items) {
      NumberValue kv = parse_number(k), vv = parse_number(v);
      if (!kv.exact || !kv.exact->is_integer() || !vv.exact || !vv.exact->is_integer())
        throw ParseError("table: entries must be integers");
      entries[kv.exact->num()] = vv.exact->num();
    }
    return ControlMap::table(std::move(entries), c.name == "table"
                                                     ? ControlMap::Table::Fallback::identity
                                                     : ControlMap::Table::Fallback::zero);
  }
  throw ParseError("unknown control map '" + c.name + "'");
}

inline std::string format_control_map(const ControlMap& m) {
  using T = ControlMap;
  if (std::holds_alternative<T::Identity>(m.v)) return "identity";
  if (const auto* a = std::get_if<T::AffineFloor>(&m.v))
    return "affine(a=" + a->a.str() + ",b=" + a->b.str() + ")";
  if (const auto* a = std::get_if<T::MaxShift>(&m.v))
    return "max_shift(c=" + std::to_string(a->c) + ")";
  if (const auto* a = std::get_if<T::ShiftGated>(&m.v))
    return "shift_gated(M=" + std::to_string(a->M) + ")";
  if (std::holds_alternative<T::ParityHalf>(m.v)) return "parity_half";
  const auto* t = std::get_if<T::Table>(&m.v);
  std::string out = t->fallback == T::Table::Fallback::identity ? "table{" : "table_zero{";
  bool first = true;
  for (const auto& [z, v] : t->values) {
    if (!first) out += ",";
    first = false;
    out += std::to_string(z) + ":" + std::to_string(v);
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Rates

inline RateRef parse_rate(std::string_view text) {
  using namespace detail_grammar;
  std::string_view s = strip(text);
  // A bare number is a constant rate.
  if (s.find('(') == std::string_view::npos && s.find('{') == std::string_view::npos) {
    NumberValue n = parse_number(s);
    return n.exact ? RateRef::constant(*n.exact) : RateRef::constant(n.value);
  }
  Call c = parse_call(s);
  if (c.name == "const") {
    NumberValue n = num_arg(c, "v");
    return n.exact ? RateRef::constant(*n.exact) : RateRef::constant(n.value);
  }
  if (c.name == "bh") return RateRef::beverton_holt(rational_arg(c, "K"));
  if (c.name == "ex415")
    return RateRef::ex415(rational_arg(c, "K"), int_arg(c, "M"), rational_arg(c, "lambda"));
  if (c.name == "exp_gate") return RateRef::exp_gate(num_arg(c, "scale").value);
  throw ParseError("unknown rate '" + c.name + "'");
}

inline std::string format_rate(const RateRef& r) {
  using T = RateRef;
  if (const auto* x = std::get_if<T::Const>(&r.v))
    return "const(v=" + format_number(x->v, x->exact) + ")";
  if (const auto* x = std::get_if<T::BevertonHolt>(&r.v)) return "bh(K=" + x->K.str() + ")";
  if (const auto* x = std::get_if<T::Ex415>(&r.v))
    return "ex415(K=" + x->K.str() + ",M=" + std::to_string(x->M) +
           ",lambda=" + x->lambda.str() + ")";
  const auto* g = std::get_if<T::ExpGate>(&r.v);
  return "exp_gate(scale=" + format_number(g->scale, std::nullopt) + ")";
}

}  // namespace bplink
