#pragma once

/// Umbrella header for the distributed MPC library.

#include "admm.hpp"
#include "closed_loop.hpp"
#include "conic/solver.hpp"
#include "io.hpp"
#include "offline_synthesis.hpp"
#include "online_ocp.hpp"
#include "scenarios.hpp"
#include "system_model.hpp"
#include "terminal_lmi.hpp"
