#include "util/kv.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "util/error.hpp"

namespace cellclip {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KvList parse_kv(std::string_view text, std::string_view source) {
  KvList out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(Errc::format, "{}:{}: expected 'key = value'", source, line_no);
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) fail(Errc::format, "{}:{}: empty key", source, line_no);
    if (!seen.emplace(key).second) fail(Errc::format, "{}:{}: key '{}' given twice", source, line_no, key);
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

std::string format_kv(const KvList& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

namespace {

template <class T>
T parse_integer(std::string_view key, std::string_view value) {
  T v{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty()) {
    fail(Errc::format, "{}: '{}' is not a valid integer", key, value);
  }
  return v;
}

}  // namespace

std::size_t parse_size(std::string_view key, std::string_view value) {
  return parse_integer<std::size_t>(key, value);
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  return parse_integer<std::uint64_t>(key, value);
}

std::int64_t parse_i64(std::string_view key, std::string_view value) {
  return parse_integer<std::int64_t>(key, value);
}

double parse_double(std::string_view key, std::string_view value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty() || !std::isfinite(v)) {
    fail(Errc::format, "{}: '{}' is not a finite number", key, value);
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(Errc::format, "{}: '{}' is not a boolean", key, value);
}

std::string format_double(double v) { return fmt::format("{}", v); }

}  // namespace cellclip
