#pragma once

#include <iosfwd>

namespace frames {

// Entry point of the `frames` tool. Returns 0 on success, 2 on a usage error
// and 1 on a runtime failure; failures print one "error: <kind>: <message>"
// line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace frames
