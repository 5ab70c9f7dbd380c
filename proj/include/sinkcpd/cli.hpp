#pragma once

#include <iosfwd>

namespace sinkcpd::cli {

/// Entry point of the `sinkcpd` executable. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sinkcpd::cli
