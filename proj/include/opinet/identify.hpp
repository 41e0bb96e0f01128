#pragma once

#include "opinet/identify/bayesian.hpp"
#include "opinet/identify/horizon.hpp"
#include "opinet/identify/multiplex.hpp"
#include "opinet/identify/report.hpp"
#include "opinet/identify/yule_walker.hpp"
