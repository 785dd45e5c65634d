#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ear::bench {

/// Exit codes: 0 success, 1 configuration or usage error, 2 numerical abort.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace ear::bench
