#pragma once

#include "opinet/numkit/l1.hpp"
#include "opinet/numkit/linalg.hpp"
#include "opinet/numkit/lp.hpp"
#include "opinet/numkit/recovery.hpp"
