// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/checkpoint.hpp"
#include "cora/numerics/gradcheck.hpp"
#include "cora/numerics/ops.hpp"
#include "cora/numerics/optim.hpp"
#include "cora/numerics/params.hpp"
#include "cora/numerics/rng.hpp"
#include "cora/numerics/sparse.hpp"
#include "cora/numerics/tensor.hpp"
