// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "bevg/cli/cli.hpp"

int main(int argc, char** argv) { return bevg::cli::run(argc, argv, std::cout, std::cerr); }
