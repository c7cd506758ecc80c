#pragma once

#include <iosfwd>

namespace unishield {

// Entry point of the `unishield` command. Returns 0 on success, 1 on an
// operational error and 2 on a usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace unishield
