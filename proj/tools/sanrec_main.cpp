// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "sanrec/cli/app.hpp"

int main(int argc, char** argv) { return sanrec::cli::run_cli(argc, argv, std::cout, std::cerr); }
