#pragma once

#include <ostream>

namespace rgan {

// Subcommands: degrade, train, eval, infer, params, bench, gradcheck, grid.
// Returns 0 on success, 1 on a module error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rgan
