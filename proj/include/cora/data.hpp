// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cora/data/interactions.hpp"
#include "cora/data/prompt.hpp"
#include "cora/data/samples.hpp"
#include "cora/data/splits.hpp"
#include "cora/data/synthetic.hpp"
#include "cora/data/tokenizer.hpp"
