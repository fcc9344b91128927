#pragma once

namespace fracinterp::app {

/// Parses the command line and runs one subcommand. Returns the process
/// exit code: 0 success, 2 validation error, 3 numeric failure.
int run_cli(int argc, char** argv);

}  // namespace fracinterp::app
