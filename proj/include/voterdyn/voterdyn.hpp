#pragma once

#include "voterdyn/config.hpp"
#include "voterdyn/counting.hpp"
#include "voterdyn/dynamics.hpp"
#include "voterdyn/errors.hpp"
#include "voterdyn/estimators.hpp"
#include "voterdyn/experiments.hpp"
#include "voterdyn/graph_state.hpp"
#include "voterdyn/manifest.hpp"
#include "voterdyn/parallel.hpp"
#include "voterdyn/patterns.hpp"
#include "voterdyn/quadrature.hpp"
#include "voterdyn/records.hpp"
#include "voterdyn/rng.hpp"
#include "voterdyn/stats.hpp"
