#include "util/io.hpp"

#include <fstream>
#include <sstream>

#include "util/error.hpp"

namespace cellclip {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open {}", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(Errc::io, "error reading {}", path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write {}", tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::io, "write to {} failed", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::io, "cannot move {} into place: {}", path.string(), ec.message());
}

std::size_t Tsv::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(Errc::format, "{}: missing column '{}'", source, name);
}

bool Tsv::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

Tsv parse_tsv(std::string_view text, std::string source) {
  Tsv t;
  t.source = std::move(source);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (!text.empty()) fail(Errc::format, "{}:{}: empty line", t.source, line_no);
      continue;
    }
    auto fields = split_tabs(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      fail(Errc::format, "{}:{}: {} fields, header has {}", t.source, line_no, fields.size(), t.header.size());
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) fail(Errc::format, "{}: missing header row", t.source);
  return t;
}

Tsv read_tsv(const std::filesystem::path& path) { return parse_tsv(read_file(path), path.string()); }

std::string format_tsv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto put = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find_first_of("\t\n\r") != std::string::npos) {
        fail(Errc::format, "TSV field '{}' contains a tab or newline", fields[i]);
      }
      if (i) out += '\t';
      out += fields[i];
    }
    out += '\n';
  };
  put(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) fail(Errc::format, "TSV row has {} fields, header has {}", r.size(), header.size());
    put(r);
  }
  return out;
}

}  // namespace cellclip
