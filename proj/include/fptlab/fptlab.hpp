#pragma once

#include "fptlab/catalog.hpp"
#include "fptlab/coefficients.hpp"
#include "fptlab/coord_point.hpp"
#include "fptlab/error.hpp"
#include "fptlab/experiments.hpp"
#include "fptlab/extraction.hpp"
#include "fptlab/grid_space.hpp"
#include "fptlab/operators.hpp"
#include "fptlab/point.hpp"
#include "fptlab/sets.hpp"
#include "fptlab/solver.hpp"
