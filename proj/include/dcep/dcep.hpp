#pragma once

// Umbrella header for the district cooling plant simulator and its controllers.

#include "dcep/baseline.hpp"
#include "dcep/checkpoint.hpp"
#include "dcep/optim.hpp"
#include "dcep/params.hpp"
#include "dcep/plant.hpp"
#include "dcep/projection.hpp"
#include "dcep/qlearn.hpp"
#include "dcep/report.hpp"
#include "dcep/rl_state.hpp"
#include "dcep/simulate.hpp"
#include "dcep/traces.hpp"
