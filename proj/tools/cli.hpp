#pragma once

#include <string>
#include <vector>

namespace screenaudit {
namespace cli {

// Entry point behind the `screenaudit` binary. Returns the process exit code:
// 0 on success, 1 on any reported failure. The vector overload (argv without
// the program name) exists so tests can drive the surface in-process.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace cli
}  // namespace screenaudit
