#pragma once

#include "dampflow/problems.hpp"
#include "dampflow/schedules.hpp"
#include "dampflow/trajectory.hpp"
#include "dampflow/lyapunov.hpp"
#include "dampflow/stability.hpp"
#include "dampflow/integrators.hpp"
#include "dampflow/bench.hpp"
