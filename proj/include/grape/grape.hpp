#pragma once

// Umbrella header for the GRAPE pulse-design toolkit.

#include "grape/control_problem.hpp"
#include "grape/dexp.hpp"
#include "grape/expm.hpp"
#include "grape/gradient.hpp"
#include "grape/line_search.hpp"
#include "grape/liouville.hpp"
#include "grape/optimizer.hpp"
#include "grape/problem_file.hpp"
#include "grape/propagation.hpp"
#include "grape/quasi_newton.hpp"
#include "grape/run.hpp"
#include "grape/spin_system.hpp"
#include "grape/types.hpp"
