#pragma once

// Umbrella header for the bplink library: population-size-dependent and
// controlled branching process kernels, equivalence and moment-matching
// analysis, analytic total-variation bounds, and the Monte Carlo TVD
// estimator.

#include "bplink/bounds.hpp"
#include "bplink/config.hpp"
#include "bplink/control.hpp"
#include "bplink/convolution.hpp"
#include "bplink/distribution.hpp"
#include "bplink/divisibility.hpp"
#include "bplink/equivalence.hpp"
#include "bplink/errors.hpp"
#include "bplink/figures.hpp"
#include "bplink/grammar.hpp"
#include "bplink/io.hpp"
#include "bplink/kernel.hpp"
#include "bplink/matching.hpp"
#include "bplink/parallel.hpp"
#include "bplink/process.hpp"
#include "bplink/rational.hpp"
#include "bplink/rng.hpp"
#include "bplink/runner.hpp"
#include "bplink/tvd.hpp"
