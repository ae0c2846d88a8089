#pragma once

#include "run_config.hpp"

#include <string>
#include <vector>

namespace border_rdd::cli {

extern const std::vector<std::string> kCommands;

//! Runs one command against a loaded config. Throws on fatal errors;
//! per-cell estimation failures end up in the status column instead.
void run_command(const std::string& command, const Config& config);

//! Full command line: `<command> --config <path> [--threads N]`.
//! Returns the process exit status.
int main_entry(int argc, char** argv);

} // namespace border_rdd::cli
