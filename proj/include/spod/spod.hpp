#pragma once

#include "spod/types.hpp"
#include "spod/shift.hpp"
#include "spod/lowrank.hpp"
#include "spod/core.hpp"
#include "spod/objective.hpp"
#include "spod/optimize.hpp"
#include "spod/generate.hpp"
#include "spod/analyze.hpp"
#include "spod/gradcheck.hpp"
#include "spod/io.hpp"
