// bplink command-line front end: config-driven simulation, equivalence and
// matching analysis, TVD bounds and estimation, and built-in figure runs.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "bplink/bplink.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bplink::ValidationError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonFlags {
  std::string out;
  std::string format;
  std::string expect;
  std::string seed;
  double scale = 1.0;
  int workers = 0;
  bool plot = false;
};

void add_common(CLI::App* app, CommonFlags& flags) {
  app->add_option("--out", flags.out, "output path stem");
  app->add_option("--format", flags.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--seed", flags.seed, "64-bit master seed");
  app->add_option("--scale", flags.scale, "replicate-count scale factor in (0,1]");
  app->add_option("--workers", flags.workers, "worker threads (overrides BPLINK_WORKERS)");
  app->add_option("--expect", flags.expect, "fail with exit 4 unless the verdict matches");
  app->add_flag("--plot", flags.plot, "emit an SVG rendering of the primary CSV");
}

void apply_flags(bplink::RunConfig& cfg, const CommonFlags& flags) {
  if (!flags.out.empty()) cfg.set("run", "out", flags.out);
  if (!flags.format.empty()) cfg.set("run", "format", flags.format);
  if (!flags.seed.empty()) cfg.set("run", "seed", flags.seed);
  if (!flags.expect.empty()) cfg.set("run", "expect", flags.expect);
  if (flags.plot) cfg.set("run", "plot", "true");
  if (flags.workers > 0) {
#ifdef _WIN32
    _putenv_s("BPLINK_WORKERS", std::to_string(flags.workers).c_str());
#else
    setenv("BPLINK_WORKERS", std::to_string(flags.workers).c_str(), 1);
#endif
  }
  if (flags.scale != 1.0) bplink::apply_figure_scale(cfg, flags.scale);
}

int execute(bplink::RunConfig cfg) {
  bplink::RunResult result = bplink::run_config(cfg);
  for (const auto& artifact : result.artifacts) std::cout << "wrote " << artifact << "\n";
  if (!result.message.empty())
    (result.code == 0 ? std::cout : std::cerr) << result.message << "\n";
  return result.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branching-process equivalence, matching and TVD toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string figure_id;
  CommonFlags flags;

  // Every analysis command takes a config file; the subcommand overrides the
  // config's [run] command. `figure` instead selects a built-in config.
  const char* commands[] = {"run", "simulate", "moments", "equivalence", "match", "bound", "tvd"};
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(
        name, name == std::string("run") ? "execute a config file's [run] command"
                                         : std::string("run the ") + name + " command");
    sub->add_option("config", config_path, "config file in the documented grammar")->required();
    add_common(sub, flags);
  }
  CLI::App* fig = app.add_subcommand("figure", "run a built-in figure configuration");
  fig->add_option("id", figure_id, "fig1 | fig2 | fig3 | fig4")->required();
  add_common(fig, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    bplink::RunConfig cfg;
    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "figure") {
      cfg = bplink::builtin_figure_config(figure_id);
    } else {
      cfg = bplink::parse_config(read_file(config_path));
      if (sub->get_name() != "run") cfg.set("run", "command", sub->get_name());
    }
    apply_flags(cfg, flags);
    return execute(std::move(cfg));
  } catch (const bplink::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return bplink::exit_code::parse;
  } catch (const bplink::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return bplink::exit_code::parse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bplink::exit_code::numeric;
  }
}
