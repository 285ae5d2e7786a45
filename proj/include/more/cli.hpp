#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace more::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1..12", "2,4,8" or a mix such as "1..3,6".
std::vector<long> parse_k_list(const std::string& text);

}  // namespace more::cli
