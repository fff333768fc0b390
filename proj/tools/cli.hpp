#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smoothar::cli {

// Exit codes: 0 success, 1 runtime failure, 2 contract or usage error,
// 3 malformed CSV/JSON input.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smoothar::cli
