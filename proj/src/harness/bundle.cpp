#include "harness/bundle.hpp"

#include <bit>
#include <cstring>
#include <set>

#include "util/error.hpp"
#include "util/io.hpp"
#include "util/kv.hpp"

namespace cellclip::harness {

namespace {

constexpr std::string_view kMagic = "cellclip-bundle 1";

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto at = s.find(sep, start);
    out.emplace_back(s.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

}  // namespace

profile::ChannelProfile EmbeddingBundle::profile(std::size_t i) const {
  const auto v = item(i);
  return {ids.at(i), channels, dim, {v.begin(), v.end()}};
}

void EmbeddingBundle::check() const {
  if (channels == 0 || dim == 0) fail(Errc::format, "bundle needs positive channel count and width");
  if (values.size() != ids.size() * channels * dim) {
    fail(Errc::shape, "bundle holds {} values for {} items of {}x{}", values.size(), ids.size(), channels, dim);
  }
  if (channel_names.size() != channels) {
    fail(Errc::format, "bundle names {} channels, header declares {}", channel_names.size(), channels);
  }
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) fail(Errc::format, "bundle item id '{}' is empty or has whitespace", id);
    if (!seen.insert(id).second) fail(Errc::format, "bundle item id '{}' appears twice", id);
  }
}

std::string serialize_bundle(const EmbeddingBundle& b) {
  b.check();
  std::string head = fmt::format("{}\nitems {}\nchannels {}\ndim {}\nchannel_names {}\n", kMagic, b.size(), b.channels,
                                 b.dim, join(b.channel_names, ','));
  std::string tail = "ids\n";
  for (const auto& id : b.ids) tail += id + "\n";
  tail += "end\n";
  // "data_offset " + 20 digits + "\n"
  const std::size_t offset = head.size() + 12 + 20 + 1 + tail.size();
  std::string out = head + fmt::format("data_offset {:020d}\n", offset) + tail;
  out.reserve(offset + 4 * b.values.size());
  for (float f : b.values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
  }
  return out;
}

EmbeddingBundle parse_bundle(std::string_view bytes, const std::string& source) {
  std::size_t pos = 0;
  auto line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) fail(Errc::format, "{}: truncated header", source);
    auto l = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return l;
  };
  auto field = [&](std::string_view key) -> std::string_view {
    const auto l = line();
    if (l.size() < key.size() + 1 || l.substr(0, key.size()) != key || l[key.size()] != ' ') {
      fail(Errc::format, "{}: expected '{} <value>', found '{}'", source, key, l);
    }
    return l.substr(key.size() + 1);
  };

  if (line() != kMagic) fail(Errc::format, "{}: not a cellclip bundle", source);
  EmbeddingBundle b;
  const std::size_t n = parse_size("items", field("items"));
  b.channels = parse_size("channels", field("channels"));
  b.dim = parse_size("dim", field("dim"));
  b.channel_names = split(field("channel_names"), ',');
  const std::size_t offset = parse_size("data_offset", field("data_offset"));
  if (line() != "ids") fail(Errc::format, "{}: expected 'ids'", source);
  for (std::size_t i = 0; i < n; ++i) b.ids.emplace_back(line());
  if (line() != "end") fail(Errc::format, "{}: expected 'end' after {} ids", source, n);
  if (pos != offset) fail(Errc::format, "{}: data_offset is {} but the header ends at byte {}", source, offset, pos);

  const std::size_t expected = 4 * n * b.channels * b.dim;
  const std::size_t actual = bytes.size() - pos;
  if (actual != expected) {
    fail(Errc::format, "{}: tensor region is {} bytes, expected {} (4 x {} items x {} channels x {} dims)", source,
         actual, expected, n, b.channels, b.dim);
  }
  b.values.resize(n * b.channels * b.dim);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& f : b.values) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(p[k]) << (8 * k);
    f = std::bit_cast<float>(bits);
    p += 4;
  }
  b.check();
  return b;
}

void write_bundle(const std::filesystem::path& path, const EmbeddingBundle& b) {
  write_file(path, serialize_bundle(b));
}

EmbeddingBundle read_bundle(const std::filesystem::path& path) {
  return parse_bundle(read_file(path), path.string());
}

}  // namespace cellclip::harness
