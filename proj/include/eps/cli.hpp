#pragma once

namespace eps {

// Full command-line entry point; returns the process exit code
// (0 ok, 2 validation problem, 3 IO problem).
int run_cli(int argc, const char* const* argv);

}  // namespace eps
