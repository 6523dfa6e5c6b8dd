#pragma once

#include "dragg/io/config.hpp"
#include "dragg/io/data.hpp"
#include "dragg/io/json.hpp"
#include "dragg/io/report.hpp"
