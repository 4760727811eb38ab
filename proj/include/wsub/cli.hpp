#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wsub {

enum ExitCode : int { kPass = 0, kVerificationFailure = 1, kUsageError = 2, kInfeasible = 3, kNotConverged = 4 };

/// Entry point of the `wsub` tool: subcommands dist, flow, geodesic, check, ldp.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace wsub
