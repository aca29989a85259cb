#pragma once

namespace zlab {

inline constexpr const char* kVersionTag = "zlab 0.1.0";

} // namespace zlab
