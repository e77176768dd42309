#pragma once

// Stage-2 localizer: Gaussian force-distribution targets, the CNN-FiLM
// network, its training loop and checkpoint I/O.

#include "clf/cnnfilm/arch.hpp"
#include "clf/cnnfilm/checkpoint.hpp"
#include "clf/cnnfilm/encoding.hpp"
#include "clf/cnnfilm/network.hpp"
#include "clf/cnnfilm/train.hpp"
