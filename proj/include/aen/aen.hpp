#pragma once

#include "aen/adam.hpp"
#include "aen/checkpoint.hpp"
#include "aen/common.hpp"
#include "aen/data.hpp"
#include "aen/loss.hpp"
#include "aen/metrics.hpp"
#include "aen/model.hpp"
#include "aen/nn.hpp"
#include "aen/ops.hpp"
#include "aen/rng.hpp"
#include "aen/tensor.hpp"
#include "aen/train.hpp"
