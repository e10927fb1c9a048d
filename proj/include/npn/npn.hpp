#pragma once

#include "npn/core.hpp"
#include "npn/denoisers.hpp"
#include "npn/diagnostics.hpp"
#include "npn/experiment.hpp"
#include "npn/metrics.hpp"
#include "npn/nullspace.hpp"
#include "npn/operators.hpp"
#include "npn/phantoms.hpp"
#include "npn/priors.hpp"
#include "npn/solvers.hpp"
#include "npn/transforms.hpp"
