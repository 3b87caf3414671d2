#pragma once
// Readable names for parametrized tests.

#include <ostream>

#include "warpfault/numerics.hpp"
#include "warpfault/simt.hpp"

namespace warpfault {

inline void PrintTo(Algorithm a, std::ostream* os) { *os << to_string(a); }
inline void PrintTo(Precision p, std::ostream* os) { *os << to_string(p); }

}  // namespace warpfault
