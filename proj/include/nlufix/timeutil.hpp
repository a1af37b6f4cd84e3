#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nlufix {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

// "2021-09-01T12:00:00Z"
std::string format_iso8601(Timestamp seconds);

// Accepts "YYYY-MM-DDTHH:MM:SSZ" (a trailing "Z" or "+00:00" is required to be
// UTC). Throws ValidationError on anything else.
Timestamp parse_iso8601(std::string_view text);

Timestamp now_utc();

} // namespace nlufix
