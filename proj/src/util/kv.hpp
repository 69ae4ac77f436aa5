#pragma once

// "key = value" text with '#' comments. Used by run configs and checkpoint
// headers.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cellclip {

using KvList = std::vector<std::pair<std::string, std::string>>;

// Throws Errc::format on a line without '=', an empty key or a repeated key.
KvList parse_kv(std::string_view text, std::string_view source = "config");
std::string format_kv(const KvList& entries);

std::size_t parse_size(std::string_view key, std::string_view value);
std::uint64_t parse_u64(std::string_view key, std::string_view value);
std::int64_t parse_i64(std::string_view key, std::string_view value);
double parse_double(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);

// Shortest text that parses back to the same double.
std::string format_double(double v);

std::string_view trim(std::string_view s);

}  // namespace cellclip
