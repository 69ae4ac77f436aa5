#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cellclip {

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file in the same directory, then renames.
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Tab-separated text with a header row. Fields cannot contain tabs or
// newlines; a trailing newline is optional.
struct Tsv {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws Errc::format naming the source if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Tsv parse_tsv(std::string_view text, std::string source);
Tsv read_tsv(const std::filesystem::path& path);
std::string format_tsv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace cellclip
