// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "attnocr/autodiff/adam.hpp"
#include "attnocr/autodiff/ops.hpp"
#include "attnocr/autodiff/tape.hpp"
#include "attnocr/autodiff/tensor.hpp"
#include "attnocr/checkpoint.hpp"
#include "attnocr/config.hpp"
#include "attnocr/decoder.hpp"
#include "attnocr/encoder.hpp"
#include "attnocr/geometry.hpp"
#include "attnocr/image.hpp"
#include "attnocr/losses.hpp"
#include "attnocr/metrics.hpp"
#include "attnocr/model.hpp"
#include "attnocr/report.hpp"
#include "attnocr/synth.hpp"
#include "attnocr/training.hpp"
#include "attnocr/vocab.hpp"
