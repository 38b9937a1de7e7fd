#pragma once

#include <string>
#include <vector>

namespace fairreg {

/// The command-line entry point, minus the program name. Subcommands:
///   generate --config F --out D    sample a dataset plus a summary sidecar
///   train    --config F --train D --eval D --out D
///   evaluate --params F --eval D --out F
///   study    --protocol F --out D  run a multi-config comparison
///   report   FILE...               render saved report/study JSON
/// Every config-taking subcommand accepts repeated `--set key=value`
/// overrides. Returns 0 only when every output file was written.
int run_cli(const std::vector<std::string>& args);

}  // namespace fairreg
