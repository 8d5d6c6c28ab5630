#pragma once

// Umbrella header for the numerical core (no I/O dependencies).

#include <hyload/consensus.hpp>
#include <hyload/control.hpp>
#include <hyload/diagnostics.hpp>
#include <hyload/equilibrium.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>
#include <hyload/hybrid.hpp>
#include <hyload/oslc.hpp>
