#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedmae {

// The `fedmae` command line: subcommands pretrain | probe | sweep | split |
// synth. Returns 0 on success, 1 on configuration/usage errors, 2 on
// runtime/protocol/IO errors. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedmae
