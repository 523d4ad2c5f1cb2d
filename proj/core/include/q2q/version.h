#pragma once

#include <cstdint>

#include "q2q/bm25.h"

namespace q2q {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace q2q
