#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lulc::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumerical = 4 };

// Full command-line entry point: parses `args` (args[0] is the program name),
// runs the chosen command and maps failures onto exit codes. Every failure
// writes exactly one line "lulc: error[<CODE>]: <message>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lulc::cli
