#pragma once

// Boost 1.74's pchip calls unqualified isnan at instantiation time.
#include <cmath>
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
