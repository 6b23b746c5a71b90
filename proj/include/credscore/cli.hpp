#ifndef CREDSCORE_CLI_HPP
#define CREDSCORE_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace credscore {

// args excludes the program name. Returns the process exit status:
// 0 success, 1 user error (bad flags, config, inputs, missing artifacts),
// 2 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace credscore

#endif
