#pragma once

namespace stsfa {

inline constexpr const char* version = "0.1.0";

} // namespace stsfa
