#pragma once

#include "dynprior/beta.hpp"
#include "dynprior/errors.hpp"
#include "dynprior/normal.hpp"
#include "dynprior/prior_solver.hpp"
#include "dynprior/rng.hpp"
#include "dynprior/simulation.hpp"
#include "dynprior/thompson.hpp"
#include "dynprior/validation.hpp"
