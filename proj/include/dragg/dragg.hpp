#pragma once

#include "dragg/aggregator.hpp"
#include "dragg/basis.hpp"
#include "dragg/bounds.hpp"
#include "dragg/core.hpp"
#include "dragg/io.hpp"
#include "dragg/learning.hpp"
#include "dragg/prosumer.hpp"
#include "dragg/sim.hpp"
