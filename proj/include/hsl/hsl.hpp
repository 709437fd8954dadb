#pragma once

// Umbrella header for the hsl library: symmetry-constrained variational
// solvers and Morse-index analysis for the Hardy-Sobolev critical equation
// on R^N and its conformal counterpart on S^N.

#include "hsl/common.hpp"
#include "hsl/eig.hpp"
#include "hsl/grids.hpp"
#include "hsl/interp.hpp"
#include "hsl/io.hpp"
#include "hsl/morse.hpp"
#include "hsl/operators.hpp"
#include "hsl/solve.hpp"
#include "hsl/sphere.hpp"
#include "hsl/symmetry.hpp"
