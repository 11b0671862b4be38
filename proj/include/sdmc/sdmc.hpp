#pragma once

// Umbrella header: modeling and analysis of networked control over
// state-dependent Markov channels — channel estimation, stability bounds,
// controller/transmission-power co-design, and closed-loop Monte Carlo.

#include "sdmc/channel.hpp"
#include "sdmc/codesign.hpp"
#include "sdmc/config.hpp"
#include "sdmc/environment.hpp"
#include "sdmc/fading.hpp"
#include "sdmc/io.hpp"
#include "sdmc/matrix.hpp"
#include "sdmc/optim/grid.hpp"
#include "sdmc/optim/local.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/optim/psd.hpp"
#include "sdmc/optim/qcqp.hpp"
#include "sdmc/rng.hpp"
#include "sdmc/sim/monte_carlo.hpp"
#include "sdmc/sim/plant.hpp"
#include "sdmc/sim/quantizer.hpp"
#include "sdmc/sim/trajectory.hpp"
#include "sdmc/stability.hpp"
#include "sdmc/sweep.hpp"
#include "sdmc/validation.hpp"
