// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header.

#include "mofc/bdrate.hpp"
#include "mofc/bitstream.hpp"
#include "mofc/checkpoint.hpp"
#include "mofc/codecnet.hpp"
#include "mofc/common.hpp"
#include "mofc/config.hpp"
#include "mofc/dataset.hpp"
#include "mofc/entropy_gap.hpp"
#include "mofc/flow_io.hpp"
#include "mofc/frame.hpp"
#include "mofc/hyperprior.hpp"
#include "mofc/laplace_table.hpp"
#include "mofc/layers.hpp"
#include "mofc/loss.hpp"
#include "mofc/mofnet.hpp"
#include "mofc/msssim.hpp"
#include "mofc/ops_conv.hpp"
#include "mofc/ops_gdn.hpp"
#include "mofc/ops_rate.hpp"
#include "mofc/ops_warp.hpp"
#include "mofc/optimizer.hpp"
#include "mofc/plot.hpp"
#include "mofc/png_io.hpp"
#include "mofc/random.hpp"
#include "mofc/range_coder.hpp"
#include "mofc/system.hpp"
#include "mofc/tape.hpp"
#include "mofc/tensor.hpp"
#include "mofc/trainer.hpp"
