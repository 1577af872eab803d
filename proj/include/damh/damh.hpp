#pragma once

#include "damh/core.hpp"
#include "damh/diagnostics.hpp"
#include "damh/experiment.hpp"
#include "damh/kernel.hpp"
#include "damh/models.hpp"
#include "damh/normal.hpp"
#include "damh/ranking.hpp"
#include "damh/rng.hpp"
#include "damh/scaling.hpp"
