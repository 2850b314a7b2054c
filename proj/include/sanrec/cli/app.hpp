// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace sanrec::cli {

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitInput = 3,
  kExitStale = 4,
  kExitVerdictFail = 5,
};

/// Entry point of the `sanrec` tool:
///
///   sanrec gen|cache|train|eval|profile [--config PATH] [--seed N]
///                                       [--out DIR] [--set key=value]...
///
/// Library errors are reported on `err` and mapped to the statuses above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sanrec::cli
