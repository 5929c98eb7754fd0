#pragma once

#include "jointauction/core.hpp"
#include "jointauction/sampling.hpp"
#include "jointauction/exact.hpp"
#include "jointauction/network.hpp"
#include "jointauction/jregnet.hpp"
#include "jointauction/trainer.hpp"
#include "jointauction/checkpoint.hpp"
#include "jointauction/evaluator.hpp"
#include "jointauction/records.hpp"
#include "jointauction/experiment.hpp"
#include "jointauction/plot.hpp"
