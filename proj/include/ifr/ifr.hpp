#pragma once

#include "chi_square.hpp"
#include "direction.hpp"
#include "error.hpp"
#include "index_fit.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "local_frechet.hpp"
#include "metric_spaces.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulation.hpp"
