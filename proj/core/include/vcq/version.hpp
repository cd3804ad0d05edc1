#pragma once

namespace vcq {

inline constexpr const char* version = "0.1.0";

}  // namespace vcq
