#pragma once

// Umbrella header.

#include "aggfc/aggregation.hpp"
#include "aggfc/checks.hpp"
#include "aggfc/config.hpp"
#include "aggfc/csv.hpp"
#include "aggfc/evaluation.hpp"
#include "aggfc/predictors.hpp"
#include "aggfc/tvar.hpp"
