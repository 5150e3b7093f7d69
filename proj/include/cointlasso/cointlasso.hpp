#pragma once

#include "dgp.hpp"
#include "diagnostics.hpp"
#include "estimator.hpp"
#include "io.hpp"
#include "montecarlo.hpp"
#include "tuning.hpp"
