#pragma once

namespace paneliv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace paneliv
