// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cora/lm/config.hpp"
#include "cora/lm/injectable.hpp"
#include "cora/lm/model.hpp"
#include "cora/lm/pretrain.hpp"
