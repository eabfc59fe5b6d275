#pragma once

#include <string_view>

namespace tlnet {

// First 16 hex digits of a SHA-256 over the source tree, computed at build time.
std::string_view code_version();

}  // namespace tlnet
