#pragma once

#include <ostream>

namespace mixens {

// Entry point of the mixens command-line tool. Subcommands: train, generate,
// equivalence, decompose, bench.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 violated
// mathematical precondition (containment violation, failed equivalence
// verdict).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mixens
