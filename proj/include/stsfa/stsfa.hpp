#pragma once

#include "stsfa/csv.hpp"
#include "stsfa/errors.hpp"
#include "stsfa/estimator.hpp"
#include "stsfa/frontier.hpp"
#include "stsfa/montecarlo.hpp"
#include "stsfa/normal.hpp"
#include "stsfa/optim.hpp"
#include "stsfa/panel.hpp"
#include "stsfa/rng.hpp"
#include "stsfa/version.hpp"
#include "stsfa/weights.hpp"
