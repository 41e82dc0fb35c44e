#pragma once

#include <string_view>

namespace cdpforge {

std::string_view version();
/// `git describe` of the source tree at configure time, or "unknown".
std::string_view source_revision();

}  // namespace cdpforge
