#pragma once

#include "config.hpp"
#include "data.hpp"
#include "experiment.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "random.hpp"
