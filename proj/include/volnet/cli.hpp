// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace volnet {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,   // unexpected (I/O, internal)
    exit_usage = 2,     // bad flags, invalid config/inputs, misaligned or mismatched files
    exit_numeric = 3,   // NaN/Inf during training or inference
};

/// Entry point behind the `volnet` executable; `args` excludes the program name.
///
///   train   --config <json> [--lr --loss-weight --optimizer --seed --epochs --batch-size
///                            --train-manifest --out-dir --resume <ckpt>]
///   predict --ckpt <file> --manifest <csv> --out <csv> [--config <json>]
///   eval    --pred <csv> --manifest <csv> [--roc-out <csv>] [--val-pred <csv> --val-manifest <csv>]
///   fuse    --pred <csv> --pred <csv> ... --manifest <csv> --out <csv> [--roc-out <csv>]
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace volnet
