#pragma once

namespace srlstm {
inline constexpr const char* kVersion = "1.0.0";
}
