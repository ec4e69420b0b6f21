#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bplink/errors.hpp"
#include "bplink/grammar.hpp"
#include "bplink/process.hpp"

namespace bplink {

// Run configuration: sections of key=value pairs in the documented grammar.
//
//   [process.a] kind=psdbp family=binomial_bh K=100
//   [process.b] kind=cbp control=binomial psi=shift_gated(M=2)
//               q=rate_catalog:ex415 K=100 M=2 lambda=3 offspring=poisson(mu=3)
//   [run] command=tvd k=1 N=1000000 seed=42
//
// Values never contain whitespace; pairs are separated by whitespace and may
// span multiple lines under one section header. '#' starts a comment.
struct RunConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end()) throw ValidationError("missing section [" + section + "]");
    auto k = s->second.find(key);
    if (k == s->second.end())
      throw ValidationError("missing key '" + key + "' in section [" + section + "]");
    return k->second;
  }
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }
  i64 get_i64(const std::string& section, const std::string& key) const {
    NumberValue n = parse_number(get(section, key));
    if (!n.exact || !n.exact->is_integer())
      throw ValidationError("key '" + key + "' must be an integer");
    return n.exact->num();
  }
  i64 get_i64_or(const std::string& section, const std::string& key, i64 fallback) const {
    return has(section, key) ? get_i64(section, key) : fallback;
  }
  double get_double_or(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? parse_number(get(section, key)).value : fallback;
  }
  u64 get_u64_or(const std::string& section, const std::string& key, u64 fallback) const {
    if (!has(section, key)) return fallback;
    return static_cast<u64>(std::stoull(get(section, key)));
  }
  std::vector<i64> get_grid_or(const std::string& section, const std::string& key,
                               std::vector<i64> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<i64> out;
    std::string v = get(section, key);
    std::size_t start = 0;
    while (start <= v.size()) {
      std::size_t comma = v.find(',', start);
      std::string item = v.substr(start, comma == std::string::npos ? comma : comma - start);
      if (!item.empty()) {
        NumberValue n = parse_number(item);
        if (!n.exact || !n.exact->is_integer())
          throw ValidationError("grid '" + key + "' must contain integers");
        out.push_back(n.exact->num());
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (out.empty()) throw ValidationError("grid '" + key + "' is empty");
    return out;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections[section][key] = value;
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.sections == b.sections;
  }
};

inline const std::set<std::string>& known_sections() {
  static const std::set<std::string> s{"process.a", "process.b", "run"};
  return s;
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      if (tok.front() == '[') {
        if (tok.back() != ']') throw ParseError("malformed section header '" + tok + "'", line_no);
        current = tok.substr(1, tok.size() - 2);
        if (known_sections().count(current) == 0)
          throw ParseError("unknown section [" + current + "]; expected process.a, process.b or run",
                           line_no);
        cfg.sections[current];
        continue;
      }
      std::size_t eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ParseError("expected key=value, got '" + tok + "'", line_no);
      if (current.empty()) throw ParseError("key '" + tok + "' before any section header", line_no);
      cfg.sections[current][tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  if (cfg.sections.count("run") == 0) throw ParseError("missing [run] section");
  return cfg;
}

inline std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const char* name : {"process.a", "process.b", "run"}) {
    auto it = cfg.sections.find(name);
    if (it == cfg.sections.end()) continue;
    out += "[" + std::string(name) + "]";
    for (const auto& [k, v] : it->second) out += " " + k + "=" + v;
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Building processes from config sections.

namespace detail_config {

inline Rational require_rational(const RunConfig& cfg, const std::string& section,
                                 const std::string& key) {
  NumberValue n = parse_number(cfg.get(section, key));
  if (!n.exact) throw ValidationError("key '" + key + "' must be rational");
  return *n.exact;
}

inline RateRef resolve_rate(const RunConfig& cfg, const std::string& section,
                            const std::string& value) {
  // `rate_catalog:NAME` pulls the catalog parameters from the same section.
  const std::string prefix = "rate_catalog:";
  if (value.rfind(prefix, 0) == 0) {
    std::string name = value.substr(prefix.size());
    if (name == "ex415")
      return RateRef::ex415(require_rational(cfg, section, "K"), cfg.get_i64(section, "M"),
                            require_rational(cfg, section, "lambda"));
    if (name == "bh") return RateRef::beverton_holt(require_rational(cfg, section, "K"));
    if (name == "exp_gate")
      return RateRef::exp_gate(cfg.get_double_or(section, "scale", 1000.0));
    throw ValidationError("unknown rate catalog entry '" + name + "'");
  }
  return parse_rate(value);
}

inline std::map<i64, Distribution> parse_law_table(const std::string& text) {
  std::map<i64, Distribution> laws;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t semi = text.find(';', start);
    std::string item =
        text.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    if (!item.empty()) {
      std::size_t colon = item.find(':');
      if (colon == std::string::npos)
        throw ParseError("tabulated laws: expected z:distribution, got '" + item + "'");
      NumberValue z = parse_number(item.substr(0, colon));
      if (!z.exact || !z.exact->is_integer())
        throw ParseError("tabulated laws: state must be an integer");
      laws.emplace(z.exact->num(), parse_distribution(item.substr(colon + 1)));
    }
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return laws;
}

}  // namespace detail_config

inline ProcessSpec build_process(const RunConfig& cfg, const std::string& section) {
  const std::string kind = cfg.get(section, "kind");
  if (kind == "psdbp") {
    const std::string family = cfg.get(section, "family");
    if (family == "binomial_bh")
      return PsdbpSpec{std::make_shared<BinomialBhFamily>(
          detail_config::require_rational(cfg, section, "K"))};
    if (family == "poisson_scaled")
      return PsdbpSpec{std::make_shared<PoissonScaledFamily>(
          detail_config::require_rational(cfg, section, "lambda"))};
    if (family == "nb_cc" || family == "nb_ex415")
      return PsdbpSpec{std::make_shared<NbCarryingCapacityFamily>(
          detail_config::require_rational(cfg, section, "lambda"), cfg.get_i64(section, "M"),
          detail_config::require_rational(cfg, section, "K"))};
    if (family == "nb_matched")
      return PsdbpSpec{std::make_shared<NbShiftMatchedFamily>(
          detail_config::require_rational(cfg, section, "lambda"), cfg.get_i64(section, "M"))};
    if (family == "three_point_matched")
      return PsdbpSpec{std::make_shared<ThreePointMatchedFamily>()};
    if (family == "poisson_ricker")
      return PsdbpSpec{std::make_shared<PoissonRickerFamily>(
          cfg.get_double_or(section, "r", 2.0), cfg.get_double_or(section, "K", 100.0))};
    if (family == "constant") {
      std::string law = cfg.get(section, "offspring");
      return PsdbpSpec{std::make_shared<ConstantOffspringFamily>(parse_distribution(law), law)};
    }
    if (family == "tabulated") {
      auto laws = detail_config::parse_law_table(cfg.get(section, "laws"));
      std::optional<Distribution> fallback;
      if (cfg.has(section, "fallback"))
        fallback = parse_distribution(cfg.get(section, "fallback"));
      return PsdbpSpec{std::make_shared<TabulatedFamily>(std::move(laws), std::move(fallback))};
    }
    throw ValidationError("unknown psdbp family '" + family + "' in [" + section + "]");
  }
  if (kind == "cbp") {
    Distribution offspring = parse_distribution(cfg.get(section, "offspring"));
    const std::string control = cfg.get(section, "control");
    if (control == "deterministic")
      return ProcessSpec{
          CbpSpec{DeterministicControl{parse_control_map(cfg.get(section, "phi"))}, offspring}};
    if (control == "poisson")
      return ProcessSpec{
          CbpSpec{PoissonControl{parse_control_map(cfg.get(section, "psi"))}, offspring}};
    if (control == "binomial")
      return ProcessSpec{CbpSpec{
          BinomialControl{parse_control_map(cfg.get(section, "psi")),
                          detail_config::resolve_rate(cfg, section, cfg.get(section, "q"))},
          offspring}};
    if (control == "negbin")
      return ProcessSpec{CbpSpec{
          NegBinControl{parse_control_map(cfg.get(section, "psi")),
                        detail_config::resolve_rate(cfg, section, cfg.get(section, "q"))},
          offspring}};
    if (control == "scaled_bernoulli")
      return ProcessSpec{CbpSpec{
          ScaledBernoulliControl{parse_control_map(cfg.get(section, "scale")),
                                 detail_config::resolve_rate(cfg, section, cfg.get(section, "p"))},
          offspring}};
    throw ValidationError("unknown control '" + control + "' in [" + section + "]");
  }
  throw ValidationError("unknown kind '" + kind + "' in [" + section + "] (psdbp or cbp)");
}

// Section key=value form of a process, for resolved-config headers.
inline std::map<std::string, std::string> describe_process(const ProcessSpec& spec) {
  std::map<std::string, std::string> out;
  if (const auto* p = std::get_if<PsdbpSpec>(&spec)) {
    out["kind"] = "psdbp";
    const OffspringFamily& fam = *p->family;
    out["family"] = fam.name();
    if (const auto* bh = dynamic_cast<const BinomialBhFamily*>(&fam)) {
      out["K"] = bh->K().str();
    } else if (const auto* ps = dynamic_cast<const PoissonScaledFamily*>(&fam)) {
      out["lambda"] = ps->lambda().str();
    } else if (const auto* nb = dynamic_cast<const NbCarryingCapacityFamily*>(&fam)) {
      out["lambda"] = nb->lambda().str();
      out["M"] = std::to_string(nb->M());
      out["K"] = nb->K().str();
    } else if (const auto* nbm = dynamic_cast<const NbShiftMatchedFamily*>(&fam)) {
      out["lambda"] = nbm->lambda().str();
      out["M"] = std::to_string(nbm->M());
    } else if (const auto* ct = dynamic_cast<const ConstantOffspringFamily*>(&fam)) {
      out["offspring"] = format_distribution(ct->law());
    } else if (fam.name() != "three_point_matched" && fam.name() != "poisson_ricker") {
      out["detail"] = fam.describe();
    }
    return out;
  }
  const auto& c = std::get<CbpSpec>(spec);
  out["kind"] = "cbp";
  out["offspring"] = format_distribution(c.offspring);
  if (const auto* d = std::get_if<DeterministicControl>(&c.control)) {
    out["control"] = "deterministic";
    out["phi"] = format_control_map(d->map);
  } else if (const auto* d2 = std::get_if<PoissonControl>(&c.control)) {
    out["control"] = "poisson";
    out["psi"] = format_control_map(d2->psi);
  } else if (const auto* d3 = std::get_if<BinomialControl>(&c.control)) {
    out["control"] = "binomial";
    out["psi"] = format_control_map(d3->psi);
    out["q"] = format_rate(d3->q);
  } else if (const auto* d4 = std::get_if<NegBinControl>(&c.control)) {
    out["control"] = "negbin";
    out["psi"] = format_control_map(d4->psi);
    out["q"] = format_rate(d4->q);
  } else if (const auto* d5 = std::get_if<ScaledBernoulliControl>(&c.control)) {
    out["control"] = "scaled_bernoulli";
    out["scale"] = format_control_map(d5->scale);
    out["p"] = format_rate(d5->p);
  }
  return out;
}

}  // namespace bplink
