#pragma once

// Everything in one include.

#include "dockekf/geometry.hpp"
#include "dockekf/types.hpp"
#include "dockekf/estimator.hpp"
#include "dockekf/filter.hpp"
#include "dockekf/sensors.hpp"
#include "dockekf/dynamics.hpp"
#include "dockekf/stats.hpp"
#include "dockekf/log_io.hpp"
#include "dockekf/scenario.hpp"
#include "dockekf/metrics_csv.hpp"
#include "dockekf/consistency.hpp"
#include "dockekf/config.hpp"
