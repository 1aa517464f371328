#pragma once

namespace qising {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace qising
