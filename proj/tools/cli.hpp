#pragma once

namespace oscillab::cli {

// Parses the command line, runs the requested suites and returns the process exit code:
// 0 all criteria pass, 1 a criterion failed, 2 configuration or environment error.
int run(int argc, char** argv);

}  // namespace oscillab::cli
