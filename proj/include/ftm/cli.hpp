#pragma once

#include <string>
#include <vector>

#include "ftm/data.hpp"

namespace ftm {

// Schemas for the usual CSV exports of the benchmark datasets, plus the
// batch size each one trains with. Copies of the schemas live under
// presets/ for inspection; the embedded ones are what the binary uses.
std::vector<std::string> preset_names();
DataSchema preset_schema(const std::string& name);
int preset_batch_size(const std::string& name);

// Entry point shared by the binary and the tests. args excludes the program
// name. Prints errors to stderr and returns a nonzero code for them.
int run_cli(const std::vector<std::string>& args);

}  // namespace ftm
