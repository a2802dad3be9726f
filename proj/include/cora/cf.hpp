// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cora/cf/embeddings.hpp"
#include "cora/cf/models.hpp"
#include "cora/cf/train.hpp"
