#pragma once

#include <ostream>

namespace crsvm::cli {

/// Entry point for the crsvm tool. Returns the process exit code; failures
/// print one line "error: <kind>: <message>" to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crsvm::cli
