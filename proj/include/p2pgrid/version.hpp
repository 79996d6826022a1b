#pragma once

namespace p2pgrid {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace p2pgrid
