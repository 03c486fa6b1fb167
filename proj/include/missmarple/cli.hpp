#ifndef MISSMARPLE_CLI_HPP
#define MISSMARPLE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace mm {

// Entry point for the `missmarple` tool. Subcommands: gen, extract, train-v,
// train-va, eval, localize, cost. Exit codes: 0 success, 2 usage,
// 3 validation, 4 runtime.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mm

#endif
