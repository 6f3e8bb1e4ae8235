#pragma once

#include "qlbs/basis.hpp"
#include "qlbs/bsm.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/experiments.hpp"
#include "qlbs/fqi_solver.hpp"
#include "qlbs/io.hpp"
#include "qlbs/irl.hpp"
#include "qlbs/linalg.hpp"
#include "qlbs/market_sim.hpp"
#include "qlbs/parallel.hpp"
#include "qlbs/portfolio.hpp"
