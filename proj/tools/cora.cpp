// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#include "cora/cli/cli.hpp"

int main(int argc, char** argv) { return cora::cli::run(argc, argv); }
