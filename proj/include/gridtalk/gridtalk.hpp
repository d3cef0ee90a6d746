#pragma once

// Umbrella header: two-agent maze communication, fitted Q(lambda) training,
// communication cost regimes, metrics, run harness and analysis tools.

#include "analysis.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "env.hpp"
#include "grid.hpp"
#include "harness.hpp"
#include "metrics.hpp"
#include "modes.hpp"
#include "net.hpp"
#include "qlearn.hpp"
#include "rng.hpp"
#include "scripted.hpp"
#include "svg.hpp"
#include "trace.hpp"
#include "util.hpp"
