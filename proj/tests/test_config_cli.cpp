#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bplink/figures.hpp"
#include "bplink/io.hpp"
#include "bplink/runner.hpp"

using namespace bplink;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "bplink_test_out";
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config parsing of the documented grammar") {
  const std::string text =
      "[process.a] kind=psdbp family=binomial_bh K=100\n"
      "[process.b] kind=cbp control=binomial psi=shift_gated(M=2) q=rate_catalog:ex415\n"
      "            K=100 M=2 lambda=3 offspring=poisson(mu=3)\n"
      "[run] command=tvd k=1 N=1000000 seed=42\n";
  RunConfig cfg = parse_config(text);
  CHECK(cfg.get("process.a", "family") == "binomial_bh");
  CHECK(cfg.get_i64("run", "N") == 1000000);
  CHECK(cfg.get_u64_or("run", "seed", 0) == 42);

  ProcessSpec a = build_process(cfg, "process.a");
  REQUIRE(is_psdbp(a));
  CHECK(conditional_moments(a, 100).mean == Catch::Approx(100.0));

  ProcessSpec b = build_process(cfg, "process.b");
  REQUIRE(is_cbp(b));
  const auto& cbp = std::get<CbpSpec>(b);
  CHECK(std::holds_alternative<BinomialControl>(cbp.control));
  CHECK(cbp.offspring.get_if<Distribution::Poisson>() != nullptr);
}

TEST_CASE("config diagnostics name the offending content") {
  CHECK_THROWS_AS(parse_config("[run] command"), ParseError);
  CHECK_THROWS_AS(parse_config("[nonsense] a=1\n[run] command=tvd"), ParseError);
  CHECK_THROWS_AS(parse_config("key=1\n[run] command=tvd"), ParseError);
  CHECK_THROWS_AS(parse_config("[process.a] kind=psdbp"), ParseError);  // no [run]
  try {
    parse_config("[run] command=tvd\n[process.a] bad-token\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad-token") != std::string::npos);
    CHECK(e.line == 2);
  }

  // out-of-range probability flagged at build time
  RunConfig cfg = parse_config(
      "[process.a] kind=cbp control=binomial psi=identity q=1.5 offspring=poisson(mu=1)\n"
      "[run] command=equivalence\n");
  CHECK_THROWS_AS(build_process(cfg, "process.a"), ValidationError);
}

TEST_CASE("resolved config text round-trips") {
  RunConfig cfg = builtin_figure_config("fig3");
  std::string text = to_text(cfg);
  RunConfig back = parse_config(text);
  CHECK(back == cfg);
}

TEST_CASE("simulate artifacts embed a re-parsable header and are reproducible") {
  std::string base = temp_dir() + "/sim";
  RunConfig cfg = parse_config(
      "[process.a] kind=psdbp family=binomial_bh K=50\n"
      "[run] command=simulate z0=5 generations=40 paths=3 seed=9 out=" +
      base + "\n");
  RunResult r1 = run_config(cfg);
  REQUIRE(r1.code == 0);
  REQUIRE_FALSE(r1.artifacts.empty());
  std::string body1 = slurp(r1.artifacts.front());

  // the '# ' header re-parses to a config that reproduces the same bytes
  RunConfig parsed = parse_csv_header(body1);
  RunResult r2 = run_config(parsed);
  REQUIRE(r2.code == 0);
  CHECK(slurp(r2.artifacts.front()) == body1);

  // CSV body has the documented columns
  CHECK(body1.find("path,generation,size\n") != std::string::npos);
}

TEST_CASE("equivalence command writes a verdict report and honors --expect") {
  std::string base = temp_dir() + "/eq";
  RunConfig cfg = parse_config(
      "[process.a] kind=cbp control=scaled_bernoulli scale=affine(a=1,b=1)\n"
      "            p=exp_gate(scale=1000) offspring=binomial(n=5,p=1/5)\n"
      "[run] command=equivalence out=" +
      base + "\n");
  RunResult r = run_config(cfg);
  CHECK(r.code == 0);
  std::string body = slurp(base + ".json");
  CHECK(body.find("immigration-at-zero") != std::string::npos);
  CHECK(body.find("\"outcome\": \"no\"") != std::string::npos);

  cfg.set("run", "expect", "yes");
  RunResult r2 = run_config(cfg);
  CHECK(r2.code == exit_code::expectation);
}

TEST_CASE("tvd command: equivalent pair estimates zero") {
  std::string base = temp_dir() + "/tvd";
  RunConfig cfg = parse_config(
      "[process.a] kind=psdbp family=poisson_scaled lambda=3\n"
      "[process.b] kind=cbp control=deterministic phi=max_shift(c=1) offspring=poisson(mu=3)\n"
      "[run] command=tvd z0=10 k=2 N=2000 seed=5 out=" +
      base + "\n");
  RunResult r = run_config(cfg);
  REQUIRE(r.code == 0);
  std::string body = slurp(base + ".csv");
  CHECK(body.find("k,z0,N,seed,tvd_estimate,stderr\n") != std::string::npos);
  CHECK(body.find("2,10,2000,5,0,0\n") != std::string::npos);
}

TEST_CASE("match command reports feasibility over the documented exit code") {
  std::string base = temp_dir() + "/match";
  RunConfig cfg = parse_config(
      "[process.a] kind=cbp control=deterministic phi=max_shift(c=1)\n"
      "            offspring=bernoulli(p=1/2)\n"
      "[run] command=match z0=2 cap=60 expect=yes out=" +
      base + "\n");
  RunResult r = run_config(cfg);
  CHECK(r.code == exit_code::expectation);
  std::string body = slurp(base + ".json");
  CHECK(body.find("\"infeasible\"") != std::string::npos);
  CHECK(body.find("\"witness\": 2") != std::string::npos);
}

TEST_CASE("bound command emits the sweep columns") {
  std::string base = temp_dir() + "/bound";
  RunConfig cfg = parse_config(
      "[process.a] kind=psdbp family=nb_matched lambda=3 M=2\n"
      "[process.b] kind=cbp control=deterministic phi=shift_gated(M=2)\n"
      "            offspring=zip(pi0=2/3,lambda=3)\n"
      "[run] command=bound z_lo=1 z_hi=64 k=3 alpha=0.5 out=" +
      base + "\n");
  RunResult r = run_config(cfg);
  INFO(r.message);
  REQUIRE(r.code == 0);
  std::string body = slurp(base + ".csv");
  CHECK(body.find("z,k,alpha,h,R,eta,j_bound,k_step_bound,closed_form,effective_bound\n") !=
        std::string::npos);
}

TEST_CASE("figure configs parse, scale, and stay in range") {
  for (const char* id : {"fig1", "fig2", "fig3", "fig4"}) {
    RunConfig cfg = builtin_figure_config(id);
    CHECK(cfg.get("run", "command") == "figure");
  }
  RunConfig fig4 = builtin_figure_config("fig4");
  apply_figure_scale(fig4, 0.01);
  CHECK(fig4.get_i64("run", "N") == 10000);
  CHECK_THROWS_AS(apply_figure_scale(fig4, 0.0), ValidationError);
  CHECK_THROWS_AS(builtin_figure_config("fig9"), ValidationError);
}

TEST_CASE("unknown command and numeric failures map to exit codes") {
  RunConfig cfg = parse_config("[run] command=dance\n");
  CHECK(run_config(cfg).code == exit_code::parse);

  // doubling point mass overflows the simulate population cap quickly
  RunConfig blow = parse_config(
      "[process.a] kind=cbp control=deterministic phi=affine(a=4,b=0) offspring=point_mass(c=4)\n"
      "[run] command=simulate z0=10 generations=64 paths=1 seed=1 out=" +
      temp_dir() + "/blow\n");
  CHECK(run_config(blow).code == exit_code::numeric);
}
