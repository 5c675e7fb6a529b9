#pragma once

#include "psokit/bench.hpp"
#include "psokit/engines.hpp"
