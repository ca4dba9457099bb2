#ifndef DGMATCH_DGMATCH_HPP
#define DGMATCH_DGMATCH_HPP

// Core library
#include "dgmatch/rng.hpp"
#include "dgmatch/geometry.hpp"
#include "dgmatch/noise.hpp"
#include "dgmatch/likelihood.hpp"

// Estimation and evaluation
#include "dgmatch/lbfgs.hpp"
#include "dgmatch/estimator.hpp"
#include "dgmatch/procrustes.hpp"

// Experiments
#include "dgmatch/stats.hpp"
#include "dgmatch/sweep.hpp"
#include "dgmatch/io.hpp"

#endif // DGMATCH_DGMATCH_HPP
