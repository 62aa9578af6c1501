#pragma once

// Umbrella header for the cusp-source localization library.

#include "cusploc/errors.hpp"
#include "cusploc/estimators.hpp"
#include "cusploc/geometry.hpp"
#include "cusploc/harness.hpp"
#include "cusploc/likelihood.hpp"
#include "cusploc/limit_field.hpp"
#include "cusploc/parallel.hpp"
#include "cusploc/quadrature.hpp"
#include "cusploc/rng.hpp"
#include "cusploc/scenario.hpp"
#include "cusploc/signal.hpp"
#include "cusploc/simulate.hpp"
#include "cusploc/stats.hpp"
