#pragma once

#include "tq/bench.hpp"
#include "tq/bitpack.hpp"
#include "tq/calib.hpp"
#include "tq/checkpoint.hpp"
#include "tq/compression.hpp"
#include "tq/dense_import.hpp"
#include "tq/error.hpp"
#include "tq/kernel.hpp"
#include "tq/pipeline.hpp"
#include "tq/real_width.hpp"
#include "tq/ternary.hpp"
#include "tq/toy_model.hpp"
