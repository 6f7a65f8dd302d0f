#pragma once

#include "mps/calibrator.hpp"
#include "mps/engine.hpp"
#include "mps/loss_matrix.hpp"
#include "mps/mcs.hpp"
#include "mps/metrics.hpp"
#include "mps/simharness.hpp"
