#ifndef GIBBSFLOW_GIBBSFLOW_HPP
#define GIBBSFLOW_GIBBSFLOW_HPP

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "io.hpp"
#include "interaction.hpp"
#include "gibbs.hpp"
#include "dynamics.hpp"
#include "twolayer.hpp"
#include "analysis.hpp"

#endif  // GIBBSFLOW_GIBBSFLOW_HPP
