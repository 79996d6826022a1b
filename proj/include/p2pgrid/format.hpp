#pragma once

#include <string>

namespace p2pgrid {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace p2pgrid
