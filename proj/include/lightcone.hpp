#pragma once

// Umbrella header for the lightcone library.

#include "lightcone/bounds.hpp"
#include "lightcone/commutator.hpp"
#include "lightcone/condexp.hpp"
#include "lightcone/config.hpp"
#include "lightcone/experiments.hpp"
#include "lightcone/fock.hpp"
#include "lightcone/grid.hpp"
#include "lightcone/harness.hpp"
#include "lightcone/onebody.hpp"
#include "lightcone/pool.hpp"
#include "lightcone/quadrature.hpp"
#include "lightcone/smooth_step.hpp"
#include "lightcone/table.hpp"
