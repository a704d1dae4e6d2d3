#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cgkqi::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Runs one command line (args[0] is the program name). Returns the exit
/// code: 0 success, 1 invalid input or usage, 2 internal error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cgkqi::cli
