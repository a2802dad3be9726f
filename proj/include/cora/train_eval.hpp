// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cora/train_eval/ablate.hpp"
#include "cora/train_eval/evaluate.hpp"
#include "cora/train_eval/experiment.hpp"
#include "cora/train_eval/metrics.hpp"
#include "cora/train_eval/pipeline_check.hpp"
#include "cora/train_eval/train.hpp"
