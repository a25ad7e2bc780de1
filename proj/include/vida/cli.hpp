// Command line front end. Exit status: 0 success, 1 input error, 2 internal error.
#pragma once

#include <ostream>

namespace vida {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vida
