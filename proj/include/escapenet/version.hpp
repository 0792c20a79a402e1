#pragma once

namespace escapenet {

inline constexpr const char* version = "0.1.0";

}  // namespace escapenet
