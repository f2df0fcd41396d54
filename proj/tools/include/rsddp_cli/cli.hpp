#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsddp::cli {

/// Exit codes: 0 success, 1 numerical or data error, 2 usage error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace rsddp::cli
