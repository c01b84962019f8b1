#pragma once

#include <string>
#include <vector>

namespace refl::cli {

// Dispatches the ingest/train/eval/diagnose/export subcommands. Returns the
// process exit status: 0 on success, 2 on usage/validation errors, 1 on
// runtime failures. Errors are printed as one `error: ...` line on stderr.
int run(const std::vector<std::string>& args);

}  // namespace refl::cli
