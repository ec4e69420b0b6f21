#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "bplink/config.hpp"
#include "bplink/errors.hpp"

namespace bplink {

// Built-in configurations reproducing the library's reference figures:
//   fig1: one Beverton-Holt PSDBP trajectory (K=100, z0=10, 1000 generations)
//   fig2: one trajectory of a CBP with immigration at zero
//   fig3: ten trajectories each of the matched max-shift DCBP / three-point
//         PSDBP pair from z0=1000
//   fig4: TVD estimates of the carrying-capacity pair over (K, k) grids for
//         both starting rules
inline RunConfig builtin_figure_config(const std::string& id) {
  RunConfig cfg;
  if (id == "fig1") {
    cfg.set("process.a", "kind", "psdbp");
    cfg.set("process.a", "family", "binomial_bh");
    cfg.set("process.a", "K", "100");
    cfg.set("run", "command", "figure");
    cfg.set("run", "figure", "fig1");
    cfg.set("run", "z0", "10");
    cfg.set("run", "generations", "1000");
    cfg.set("run", "paths", "1");
    cfg.set("run", "seed", "101");
    cfg.set("run", "out", "fig1");
    return cfg;
  }
  if (id == "fig2") {
    cfg.set("process.a", "kind", "cbp");
    cfg.set("process.a", "control", "scaled_bernoulli");
    cfg.set("process.a", "scale", "affine(a=1,b=1)");
    cfg.set("process.a", "p", "exp_gate(scale=1000)");
    cfg.set("process.a", "offspring", "binomial(n=5,p=1/5)");
    cfg.set("run", "command", "figure");
    cfg.set("run", "figure", "fig2");
    cfg.set("run", "z0", "1");
    cfg.set("run", "generations", "300");
    cfg.set("run", "paths", "1");
    cfg.set("run", "seed", "102");
    cfg.set("run", "out", "fig2");
    return cfg;
  }
  if (id == "fig3") {
    cfg.set("process.a", "kind", "psdbp");
    cfg.set("process.a", "family", "three_point_matched");
    cfg.set("process.b", "kind", "cbp");
    cfg.set("process.b", "control", "deterministic");
    cfg.set("process.b", "phi", "max_shift(c=1)");
    cfg.set("process.b", "offspring", "binomial(n=2,p=1/2)");
    cfg.set("run", "command", "figure");
    cfg.set("run", "figure", "fig3");
    cfg.set("run", "z0", "1000");
    cfg.set("run", "generations", "100");
    cfg.set("run", "paths", "10");
    cfg.set("run", "seed", "103");
    cfg.set("run", "out", "fig3");
    return cfg;
  }
  if (id == "fig4") {
    cfg.set("run", "command", "figure");
    cfg.set("run", "figure", "fig4");
    cfg.set("run", "lambda", "3");
    cfg.set("run", "M", "2");
    cfg.set("run", "K_grid", "3,5,10,15,25,37,50,75,100,150,200");
    cfg.set("run", "k_grid", "1,2,5,10");
    cfg.set("run", "N", "1000000");
    cfg.set("run", "z0_rule", "both");
    cfg.set("run", "side", "psdbp");
    cfg.set("run", "seed", "104");
    cfg.set("run", "out", "fig4");
    return cfg;
  }
  throw ValidationError("unknown figure '" + id + "' (fig1..fig4)");
}

// Scales replicate counts (paths for trajectory figures, N for the sweep)
// down to `scale` of the full run, with a floor of 1 path / 100 iterations.
inline void apply_figure_scale(RunConfig& cfg, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ValidationError("scale must be in (0, 1]");
  if (scale == 1.0) return;
  if (cfg.has("run", "N")) {
    i64 n = cfg.get_i64("run", "N");
    cfg.set("run", "N",
            std::to_string(std::max<i64>(100, static_cast<i64>(std::llround(
                                                  static_cast<double>(n) * scale)))));
  }
  if (cfg.has("run", "paths")) {
    i64 p = cfg.get_i64("run", "paths");
    cfg.set("run", "paths",
            std::to_string(std::max<i64>(1, static_cast<i64>(std::llround(
                                                 static_cast<double>(p) * scale)))));
  }
  if (cfg.has("run", "generations")) {
    i64 g = cfg.get_i64("run", "generations");
    cfg.set("run", "generations",
            std::to_string(std::max<i64>(10, static_cast<i64>(std::llround(
                                                  static_cast<double>(g) * std::sqrt(scale))))));
  }
  cfg.set("run", "scale", format_number(scale, std::nullopt));
}

}  // namespace bplink
