#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bplink/bounds.hpp"
#include "bplink/config.hpp"
#include "bplink/equivalence.hpp"
#include "bplink/figures.hpp"
#include "bplink/io.hpp"
#include "bplink/kernel.hpp"
#include "bplink/matching.hpp"
#include "bplink/tvd.hpp"

namespace bplink {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int parse = 2;
inline constexpr int numeric = 3;
inline constexpr int expectation = 4;
}  // namespace exit_code

struct RunResult {
  int code = exit_code::ok;
  std::vector<std::string> artifacts;
  std::string message;
};

namespace detail_run {

using json = nlohmann::json;

inline std::string out_base(const RunConfig& cfg, const std::string& fallback) {
  return cfg.get_or("run", "out", fallback);
}

inline bool plot_enabled(const RunConfig& cfg) {
  return cfg.get_or("run", "plot", "false") == "true";
}

inline std::string format_kind(const RunConfig& cfg) {
  std::string f = cfg.get_or("run", "format", "csv");
  if (f != "csv" && f != "json") throw ValidationError("format must be csv or json");
  return f;
}

// The resolved config embedded into artifacts: process sections re-expressed
// in canonical grammar plus the effective run options.
inline RunConfig resolve(const RunConfig& cfg, const std::map<std::string, std::string>& run_extra) {
  RunConfig out;
  for (const char* sec : {"process.a", "process.b"}) {
    if (cfg.sections.count(sec) == 0) continue;
    ProcessSpec spec = build_process(cfg, sec);
    for (auto& [k, v] : describe_process(spec)) out.set(sec, k, v);
    // rate-catalog parameters live beside the control spec; keep them.
    for (const char* key : {"K", "M", "lambda", "scale"})
      if (cfg.has(sec, key) && !out.has(sec, key)) out.set(sec, key, cfg.get(sec, key));
  }
  auto run = cfg.sections.find("run");
  if (run != cfg.sections.end())
    for (const auto& [k, v] : run->second) out.set("run", k, v);
  for (const auto& [k, v] : run_extra) out.set("run", k, v);
  return out;
}

inline void emit(RunResult& result, const RunConfig& resolved, const std::string& base,
                 const std::string& format, const std::string& header,
                 const std::vector<std::string>& rows, const json& as_json) {
  if (format == "csv") {
    std::string path = base + ".csv";
    write_file(path, render_csv(resolved, header, rows));
    result.artifacts.push_back(path);
  } else {
    std::string path = base + ".json";
    json wrapper;
    wrapper["config"] = to_text(resolved);
    wrapper["data"] = as_json;
    write_file(path, wrapper.dump(2) + "\n");
    result.artifacts.push_back(path);
  }
}

inline json estimate_json(const TvdEstimate& e) {
  return json{{"tvd_estimate", e.value},
              {"stderr", e.std_error},
              {"replicates", e.replicates},
              {"seed", e.seed},
              {"side", to_string(e.sampled_side)}};
}

// Tabulated per-state offspring laws of a constructed PSDBP, in the
// distributions grammar.
inline json tabulate_family(const OffspringFamily& fam, i64 z_hi) {
  json laws = json::object();
  for (i64 z = 0; z <= z_hi; ++z) {
    try {
      laws[std::to_string(z)] = format_distribution(fam.offspring(z));
    } catch (const std::exception& e) {
      laws[std::to_string(z)] = std::string("unavailable: ") + e.what();
    }
  }
  return json{{"family", fam.describe()}, {"laws", laws}};
}

// --------------------------- commands --------------------------------------

inline RunResult cmd_simulate(const RunConfig& cfg) {
  RunResult result;
  i64 z0 = cfg.get_i64_or("run", "z0", 1);
  i64 generations = cfg.get_i64_or("run", "generations", 100);
  i64 paths = cfg.get_i64_or("run", "paths", 1);
  u64 seed = cfg.get_u64_or("run", "seed", 0);
  RunConfig resolved = resolve(cfg, {{"command", "simulate"},
                                     {"z0", std::to_string(z0)},
                                     {"generations", std::to_string(generations)},
                                     {"paths", std::to_string(paths)},
                                     {"seed", std::to_string(seed)}});
  std::string base = out_base(cfg, "simulate");
  bool two = cfg.sections.count("process.b") > 0;
  for (const char* sec : {"process.a", "process.b"}) {
    if (cfg.sections.count(sec) == 0) continue;
    ProcessSpec spec = build_process(cfg, sec);
    TrajectoryTable table = simulate(spec, z0, generations, paths, seed);
    std::vector<std::string> rows;
    std::vector<SvgSeries> series;
    for (i64 p = 0; p < paths; ++p) {
      SvgSeries s;
      s.label = "path " + std::to_string(p);
      for (i64 g = 0; g <= generations; ++g) {
        i64 size = table.sizes[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)];
        rows.push_back(std::to_string(p) + "," + std::to_string(g) + "," + std::to_string(size));
        s.x.push_back(static_cast<double>(g));
        s.y.push_back(static_cast<double>(size));
      }
      series.push_back(std::move(s));
    }
    std::string stem = two ? base + (std::string(sec) == "process.a" ? "_a" : "_b") : base;
    std::string path = stem + ".csv";
    write_file(path, render_csv(resolved, "path,generation,size", rows));
    result.artifacts.push_back(path);
    if (plot_enabled(cfg)) {
      std::string svg_path = stem + ".svg";
      write_file(svg_path, render_svg_lines(series, "generation", "population size"));
      result.artifacts.push_back(svg_path);
    }
  }
  return result;
}

inline RunResult cmd_moments(const RunConfig& cfg) {
  RunResult result;
  i64 z_lo = cfg.get_i64_or("run", "z_lo", 0);
  i64 z_hi = cfg.get_i64_or("run", "z_hi", 50);
  if (z_hi < z_lo) throw ValidationError("moments: z_hi < z_lo");
  RunConfig resolved = resolve(cfg, {{"command", "moments"},
                                     {"z_lo", std::to_string(z_lo)},
                                     {"z_hi", std::to_string(z_hi)}});
  std::vector<std::string> rows;
  json data = json::array();
  for (const char* sec : {"process.a", "process.b"}) {
    if (cfg.sections.count(sec) == 0) continue;
    ProcessSpec spec = build_process(cfg, sec);
    std::string label = std::string(sec) == "process.a" ? "a" : "b";
    for (i64 z = z_lo; z <= z_hi; ++z) {
      ConditionalMoments m = conditional_moments(spec, z);
      rows.push_back(std::to_string(z) + "," + label + "," + csv_number(m.mean) + "," +
                     csv_number(m.variance));
      data.push_back(
          json{{"z", z}, {"process", label}, {"mean", m.mean}, {"variance", m.variance}});
    }
  }
  emit(result, resolved, out_base(cfg, "moments"), format_kind(cfg), "z,process,mean,variance",
       rows, data);
  return result;
}

inline RunResult cmd_equivalence(const RunConfig& cfg) {
  RunResult result;
  ProcessSpec spec = build_process(cfg, "process.a");
  const auto* cbp = std::get_if<CbpSpec>(&spec);
  if (cbp == nullptr) throw ValidationError("equivalence: process.a must be a CBP");
  i64 z0 = cfg.get_i64_or("run", "z0", 1);
  i64 cap = cfg.get_i64_or("run", "cap", 200);
  RunConfig resolved = resolve(
      cfg, {{"command", "equivalence"}, {"z0", std::to_string(z0)}, {"cap", std::to_string(cap)}});
  EquivalenceVerdict v = decide_equivalence(*cbp, z0, cap);
  json report{{"outcome", v.outcome == EqOutcome::yes      ? "yes"
                          : v.outcome == EqOutcome::no     ? "no"
                                                           : "unknown"},
              {"rule", v.rule},
              {"reason", v.reason},
              {"construction_available", v.construction_available},
              {"attainable_truncated", v.attainable_truncated},
              {"audited_range_only", v.audited_range_only}};
  if (v.witness) report["witness"] = *v.witness;
  if (v.outcome == EqOutcome::yes && v.construction_available) {
    PsdbpSpec constructed = construct_equivalent_psdbp(*cbp, z0, cap);
    report["construction"] = tabulate_family(*constructed.family, std::min<i64>(cap, 30));
  }
  std::string path = out_base(cfg, "equivalence") + ".json";
  json wrapper{{"config", to_text(resolved)}, {"data", report}};
  write_file(path, wrapper.dump(2) + "\n");
  result.artifacts.push_back(path);
  std::string expect = cfg.get_or("run", "expect", "");
  if (!expect.empty() && report["outcome"] != expect) {
    result.code = exit_code::expectation;
    result.message = "expected outcome '" + expect + "', got '" +
                     report["outcome"].get<std::string>() + "'";
  }
  return result;
}

inline RunResult cmd_match(const RunConfig& cfg) {
  RunResult result;
  i64 z0 = cfg.get_i64_or("run", "z0", 1);
  i64 cap = cfg.get_i64_or("run", "cap", 200);
  RunConfig resolved = resolve(
      cfg, {{"command", "match"}, {"z0", std::to_string(z0)}, {"cap", std::to_string(cap)}});
  json report;
  bool feasible = true;
  if (cfg.sections.count("process.b") > 0) {
    ProcessSpec a = build_process(cfg, "process.a");
    ProcessSpec b = build_process(cfg, "process.b");
    const auto* psdbp = std::get_if<PsdbpSpec>(&a);
    const auto* cbp = std::get_if<CbpSpec>(&b);
    if (psdbp == nullptr || cbp == nullptr) {
      // accept either order
      psdbp = std::get_if<PsdbpSpec>(&b);
      cbp = std::get_if<CbpSpec>(&a);
    }
    if (psdbp == nullptr || cbp == nullptr)
      throw ValidationError("match: need one PSDBP and one CBP");
    i64 z_lo = cfg.get_i64_or("run", "z_lo", 0);
    i64 z_hi = cfg.get_i64_or("run", "z_hi", cap);
    CheckMatchResult r = check_match(*psdbp, *cbp, z_lo, z_hi);
    report["mode"] = "check";
    report["matched"] = r.matched;
    report["max_relative_residual"] = r.max_relative_residual;
    json viol = json::array();
    for (const auto& v : r.violations)
      viol.push_back(json{{"z", v.z},
                          {"mean_residual", v.mean_residual},
                          {"variance_residual", v.variance_residual},
                          {"exact", v.exact}});
    report["violations"] = viol;
    feasible = r.matched;
  } else {
    ProcessSpec a = build_process(cfg, "process.a");
    MatchReport r;
    if (const auto* cbp = std::get_if<CbpSpec>(&a)) {
      r = match_psdbp_to_dcbp(*cbp, z0, cap);
      report["mode"] = "psdbp_to_dcbp";
      if (r.feasible() && r.psdbp_construction)
        report["construction"] =
            tabulate_family(*r.psdbp_construction->family, std::min<i64>(cap, 30));
    } else {
      const auto& psdbp = std::get<PsdbpSpec>(a);
      r = match_dcbp_to_psdbp(psdbp, z0, cap, cfg.get_i64_or("run", "x_cap", 10000));
      report["mode"] = "dcbp_to_psdbp";
      if (r.feasible() && r.dcbp_construction) {
        const auto& det = std::get<DeterministicControl>(r.dcbp_construction->control);
        report["construction"] = json{{"phi", format_control_map(det.map)},
                                      {"offspring", format_distribution(r.dcbp_construction->offspring)}};
      }
    }
    report["feasibility"] = r.feasibility == Feasibility::feasible     ? "feasible"
                            : r.feasibility == Feasibility::infeasible ? "infeasible"
                                                                       : "unknown";
    if (r.witness) report["witness"] = *r.witness;
    if (!r.failed_condition.empty()) report["failed_condition"] = r.failed_condition;
    report["truncated"] = r.truncated;
    json dv = json::array();
    for (auto& [z, d] : r.d_values) dv.push_back(json{{"z", z}, {"d", d}});
    report["d_values"] = dv;
    feasible = r.feasible();
  }
  std::string path = out_base(cfg, "match") + ".json";
  write_file(path, json{{"config", to_text(resolved)}, {"data", report}}.dump(2) + "\n");
  result.artifacts.push_back(path);
  std::string expect = cfg.get_or("run", "expect", "");
  if (expect == "yes" && !feasible) {
    result.code = exit_code::expectation;
    result.message = "expected a feasible match";
  }
  return result;
}

inline RunResult cmd_bound(const RunConfig& cfg) {
  RunResult result;
  ProcessSpec a = build_process(cfg, "process.a");
  ProcessSpec b = build_process(cfg, "process.b");
  const auto* psdbp = std::get_if<PsdbpSpec>(&a);
  const auto* dcbp = std::get_if<CbpSpec>(&b);
  if (psdbp == nullptr || dcbp == nullptr || !is_deterministic(dcbp->control))
    throw ValidationError("bound: process.a must be a PSDBP and process.b a DCBP");
  i64 z_lo = cfg.get_i64_or("run", "z_lo", 1);
  i64 z_hi = cfg.get_i64_or("run", "z_hi", 200);
  i64 k = cfg.get_i64_or("run", "k", 1);
  double alpha = cfg.get_double_or("run", "alpha", 0.5);
  std::vector<i64> z_grid = cfg.get_grid_or("run", "z_grid", {});
  if (z_grid.empty())
    for (i64 z = z_lo; z <= z_hi; z = std::max(z + 1, z + z / 4)) z_grid.push_back(z);
  RunConfig resolved = resolve(cfg, {{"command", "bound"},
                                     {"z_lo", std::to_string(z_lo)},
                                     {"z_hi", std::to_string(z_hi)},
                                     {"k", std::to_string(k)},
                                     {"alpha", csv_number(alpha)}});
  CertifyResult cert = certify_regularity(*psdbp, *dcbp, z_lo, z_hi);
  if (!cert.ok()) {
    json viol = json::array();
    for (const auto& v : cert.violations)
      viol.push_back(json{{"condition", v.condition}, {"witness", v.witness}, {"detail", v.detail}});
    std::string path = out_base(cfg, "bound") + ".json";
    write_file(path,
               json{{"config", to_text(resolved)}, {"data", json{{"violations", viol}}}}.dump(2) +
                   "\n");
    result.artifacts.push_back(path);
    result.message = "regularity conditions violated; see report";
    return result;
  }
  const RegularityCertificate& c = *cert.certificate;
  std::vector<std::string> rows;
  json data = json::array();
  for (i64 z : z_grid) {
    double zd = static_cast<double>(z);
    double j = one_step_bound(zd, c);
    double ks = k_step_bound(zd, k, alpha, c);
    double cf_value = std::numeric_limits<double>::quiet_NaN();
    try {
      cf_value = closed_form_bound(zd, k, alpha, c).value;
    } catch (const DegenerateRatioError&) {
    }
    double effective = std::min(1.0, ks);
    rows.push_back(std::to_string(z) + "," + std::to_string(k) + "," + csv_number(alpha) + "," +
                   csv_number(c.h) + "," + csv_number(c.R) + "," + csv_number(c.eta) + "," +
                   csv_number(j) + "," + csv_number(ks) + "," + csv_number(cf_value) + "," +
                   csv_number(effective));
    data.push_back(json{{"z", z},
                        {"k", k},
                        {"alpha", alpha},
                        {"h", c.h},
                        {"R", c.R},
                        {"eta", c.eta},
                        {"j_bound", j},
                        {"k_step_bound", ks},
                        {"closed_form", cf_value},
                        {"effective_bound", effective}});
  }
  emit(result, resolved, out_base(cfg, "bound"), format_kind(cfg),
       "z,k,alpha,h,R,eta,j_bound,k_step_bound,closed_form,effective_bound", rows, data);
  if (plot_enabled(cfg)) {
    SvgSeries s;
    s.label = "k_step_bound";
    for (i64 z : z_grid) {
      s.x.push_back(static_cast<double>(z));
      s.y.push_back(std::min(1.0, k_step_bound(static_cast<double>(z), k, alpha, c)));
    }
    std::string path = out_base(cfg, "bound") + ".svg";
    write_file(path, render_svg_lines({s}, "z", "bound"));
    result.artifacts.push_back(path);
  }
  return result;
}

inline RunResult cmd_tvd(const RunConfig& cfg) {
  RunResult result;
  ProcessSpec a = build_process(cfg, "process.a");
  ProcessSpec b = build_process(cfg, "process.b");
  const auto* psdbp = std::get_if<PsdbpSpec>(&a);
  const auto* cbp = std::get_if<CbpSpec>(&b);
  if (psdbp == nullptr || cbp == nullptr) {
    psdbp = std::get_if<PsdbpSpec>(&b);
    cbp = std::get_if<CbpSpec>(&a);
  }
  if (psdbp == nullptr || cbp == nullptr) throw ValidationError("tvd: need a PSDBP and a CBP");
  i64 z0 = cfg.get_i64_or("run", "z0", 1);
  i64 N = cfg.get_i64_or("run", "N", 10000);
  u64 seed = cfg.get_u64_or("run", "seed", 0);
  std::string side_str = cfg.get_or("run", "side", "psdbp");
  if (side_str != "psdbp" && side_str != "cbp")
    throw ValidationError("side must be psdbp or cbp");
  SampleSide side = side_str == "psdbp" ? SampleSide::psdbp : SampleSide::cbp;
  std::vector<i64> k_grid = cfg.get_grid_or("run", "k_grid", {cfg.get_i64_or("run", "k", 1)});
  double tail_tol = cfg.get_double_or("run", "tail_tol", kDefaultTailTol);
  std::string mode = cfg.get_or("run", "mode", "estimate");
  RunConfig resolved = resolve(cfg, {{"command", "tvd"},
                                     {"z0", std::to_string(z0)},
                                     {"N", std::to_string(N)},
                                     {"seed", std::to_string(seed)},
                                     {"side", side_str},
                                     {"mode", mode}});
  TransitionKernel kp{ProcessSpec{*psdbp}, tail_tol};
  TransitionKernel kc{ProcessSpec{*cbp}, tail_tol};
  std::vector<std::string> rows;
  json data = json::array();
  for (i64 k : k_grid) {
    if (mode == "exact") {
      if (k != 1) throw ValidationError("tvd: mode=exact supports k=1 only");
      ExactTvd e = exact_one_step_tvd(kp, kc, z0);
      rows.push_back("1," + std::to_string(z0) + ",exact,," + csv_number(e.value) + "," +
                     csv_number(e.truncation_error));
      data.push_back(json{{"k", 1},
                          {"z0", z0},
                          {"mode", "exact"},
                          {"tvd", e.value},
                          {"truncation_error", e.truncation_error}});
    } else {
      TvdEstimate e = estimate_path_tvd(kp, kc, z0, k, N, seed, side);
      rows.push_back(std::to_string(k) + "," + std::to_string(z0) + "," + std::to_string(N) + "," +
                     std::to_string(seed) + "," + csv_number(e.value) + "," +
                     csv_number(e.std_error));
      json j = estimate_json(e);
      j["k"] = k;
      j["z0"] = z0;
      data.push_back(j);
    }
  }
  emit(result, resolved, out_base(cfg, "tvd"), format_kind(cfg),
       mode == "exact" ? "k,z0,mode,unused,tvd,truncation_error"
                       : "k,z0,N,seed,tvd_estimate,stderr",
       rows, data);
  return result;
}

inline RunResult cmd_figure4(const RunConfig& cfg) {
  RunResult result;
  Rational lambda = detail_config::require_rational(cfg, "run", "lambda");
  i64 M = cfg.get_i64("run", "M");
  std::vector<i64> K_grid = cfg.get_grid_or("run", "K_grid", {10, 25, 50, 100, 200});
  std::vector<i64> k_grid = cfg.get_grid_or("run", "k_grid", {1, 2, 5});
  i64 N = cfg.get_i64_or("run", "N", 100000);
  u64 seed = cfg.get_u64_or("run", "seed", 104);
  std::string side_str = cfg.get_or("run", "side", "psdbp");
  SampleSide side = side_str == "cbp" ? SampleSide::cbp : SampleSide::psdbp;
  std::string rule_str = cfg.get_or("run", "z0_rule", "both");
  std::vector<Z0Rule> rules;
  if (rule_str == "one")
    rules = {Z0Rule::one};
  else if (rule_str == "carrying_capacity")
    rules = {Z0Rule::carrying_capacity};
  else if (rule_str == "both")
    rules = {Z0Rule::one, Z0Rule::carrying_capacity};
  else
    throw ValidationError("z0_rule must be one, carrying_capacity or both");

  RunConfig resolved = resolve(cfg, {{"command", "figure"}, {"figure", "fig4"}});
  PairFactory factory = carrying_capacity_pair_factory(lambda, M);
  std::string base = out_base(cfg, "fig4");
  for (Z0Rule rule : rules) {
    SweepResult sr = sweep(factory, K_grid, k_grid, rule, N, seed, side);
    std::vector<std::string> rows;
    json data = json::array();
    for (const auto& cell : sr.cells) {
      rows.push_back(std::to_string(cell.K) + "," + std::to_string(cell.k) + "," +
                     std::to_string(cell.z0) + "," + std::to_string(N) + "," +
                     std::to_string(cell.estimate.seed) + "," + csv_number(cell.estimate.value) +
                     "," + csv_number(cell.estimate.std_error));
      json j = estimate_json(cell.estimate);
      j["K"] = cell.K;
      j["k"] = cell.k;
      j["z0"] = cell.z0;
      data.push_back(j);
    }
    std::string stem = base + (rule == Z0Rule::one ? "_z0_one" : "_z0_K");
    emit(result, resolved, stem, format_kind(cfg), "K,k,z0,N,seed,tvd_estimate,stderr", rows,
         data);
    if (plot_enabled(cfg)) {
      std::vector<SvgSeries> series;
      for (i64 k : k_grid) {
        SvgSeries s;
        s.label = "k=" + std::to_string(k);
        for (const auto& cell : sr.cells)
          if (cell.k == k) {
            s.x.push_back(static_cast<double>(cell.K));
            s.y.push_back(cell.estimate.value);
          }
        series.push_back(std::move(s));
      }
      std::string path = stem + ".svg";
      write_file(path, render_svg_lines(series, "K", "estimated TVD"));
      result.artifacts.push_back(path);
    }
  }
  return result;
}

inline RunResult cmd_figure(const RunConfig& cfg) {
  std::string id = cfg.get_or("run", "figure", "");
  if (id == "fig1" || id == "fig2" || id == "fig3") return cmd_simulate(cfg);
  if (id == "fig4") return cmd_figure4(cfg);
  throw ValidationError("figure command needs figure=fig1..fig4");
}

inline RunResult dispatch(const RunConfig& cfg) {
  std::string command = cfg.get("run", "command");
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "moments") return cmd_moments(cfg);
  if (command == "equivalence") return cmd_equivalence(cfg);
  if (command == "match") return cmd_match(cfg);
  if (command == "bound") return cmd_bound(cfg);
  if (command == "tvd") return cmd_tvd(cfg);
  if (command == "figure") return cmd_figure(cfg);
  throw ValidationError("unknown command '" + command + "'");
}

}  // namespace detail_run

// Executes a parsed config; exceptions map to the documented exit codes.
inline RunResult run_config(const RunConfig& cfg) {
  try {
    return detail_run::dispatch(cfg);
  } catch (const ParseError& e) {
    return {exit_code::parse, {}, std::string("parse error: ") + e.what()};
  } catch (const ValidationError& e) {
    return {exit_code::parse, {}, std::string("validation error: ") + e.what()};
  } catch (const std::invalid_argument& e) {
    return {exit_code::parse, {}, std::string("validation error: ") + e.what()};
  } catch (const SupportOverflowError& e) {
    return {exit_code::numeric, {}, std::string("numeric failure: ") + e.what()};
  } catch (const LikelihoodUnderflowError& e) {
    return {exit_code::numeric, {}, std::string("numeric failure: ") + e.what()};
  } catch (const DegenerateRatioError& e) {
    return {exit_code::numeric, {}, std::string("numeric failure: ") + e.what()};
  } catch (const RationalOverflowError& e) {
    return {exit_code::numeric, {}, std::string("numeric failure: ") + e.what()};
  }
}

}  // namespace bplink
