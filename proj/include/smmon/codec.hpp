#pragma once

#include <string>
#include <string_view>

namespace smmon {

/// Standard alphabet, '=' padded.
std::string base64_encode(std::string_view data);

/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

} // namespace smmon
