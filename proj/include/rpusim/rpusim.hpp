#pragma once

#include "rpusim/calibration.hpp"
#include "rpusim/config.hpp"
#include "rpusim/dataset.hpp"
#include "rpusim/device.hpp"
#include "rpusim/experiment.hpp"
#include "rpusim/linear_op.hpp"
#include "rpusim/lstm.hpp"
#include "rpusim/matrix.hpp"
#include "rpusim/network.hpp"
#include "rpusim/quantizer.hpp"
#include "rpusim/rng.hpp"
#include "rpusim/tiki_taka.hpp"
#include "rpusim/tile.hpp"
#include "rpusim/trainer.hpp"
