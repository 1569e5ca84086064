#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hdf::cli {

// Exit codes: 0 pass, 1 invariant failure, 2 usage or contract error.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hdf::cli
