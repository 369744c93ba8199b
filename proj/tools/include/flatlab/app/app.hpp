#pragma once

#include <iosfwd>

#include "flatlab/app/config.hpp"
#include "flatlab/app/report.hpp"
#include "flatlab/error.hpp"

namespace flatlab::app {

/// Process exit statuses.
enum ExitCode : int {
  kExitPass = 0,
  kExitCheckFailed = 1,
  kExitConfigInvalid = 2,
  kExitNumerical = 3,
  kExitOutOfDomain = 4,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Dispatches to the command; timings are filled in, files are not written.
Report run(const RunConfig& config);

/// `flatlab <command> [--config path] [--a.b value ...]`. Writes the report
/// files named in the config (or the JSON report to out when none is named)
/// and returns the exit status.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace flatlab::app
