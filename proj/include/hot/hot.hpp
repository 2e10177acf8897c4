#pragma once

#include "hot/baselines.hpp"
#include "hot/cost.hpp"
#include "hot/data_model.hpp"
#include "hot/error.hpp"
#include "hot/hot_core.hpp"
#include "hot/matrix_io.hpp"
#include "hot/ot.hpp"
#include "hot/parallel.hpp"
#include "hot/rng.hpp"
#include "hot/rotation.hpp"
#include "hot/synth.hpp"
#include "hot/results_io.hpp"
