#pragma once

#include "dpc/numerics/linalg.hpp"
#include "dpc/numerics/qp.hpp"
#include "dpc/numerics/transportation.hpp"
