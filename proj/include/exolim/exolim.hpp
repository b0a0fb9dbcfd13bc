#pragma once

#include "exolim/config.hpp"
#include "exolim/constants.hpp"
#include "exolim/diamagnetism.hpp"
#include "exolim/geometry.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/integrator.hpp"
#include "exolim/io.hpp"
#include "exolim/kernels.hpp"
#include "exolim/limits.hpp"
#include "exolim/lockin.hpp"
#include "exolim/numerics.hpp"
#include "exolim/random.hpp"
#include "exolim/reproduce.hpp"
#include "exolim/series.hpp"
#include "exolim/stats.hpp"
#include "exolim/systematics.hpp"
