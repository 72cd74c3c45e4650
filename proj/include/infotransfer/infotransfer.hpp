// Umbrella header.
#pragma once

#include "infotransfer/bifurcation.hpp"
#include "infotransfer/core.hpp"
#include "infotransfer/entropy.hpp"
#include "infotransfer/error.hpp"
#include "infotransfer/experiment.hpp"
#include "infotransfer/mixture.hpp"
#include "infotransfer/tracker.hpp"
