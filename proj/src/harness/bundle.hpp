#pragma once

// Per-image channel profiles on disk.
//
//   cellclip-bundle 1
//   items <n>
//   channels <C>
//   dim <d>
//   channel_names <comma-separated, C names>
//   data_offset <20-digit byte offset of the tensor region>
//   ids
//   <n lines, one item id each>
//   end
//
// The tensor region holds n×C×d little-endian f32 values, row-major, and
// starts right after "end\n"; the file ends with it.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "profile/profile.hpp"

namespace cellclip::harness {

struct EmbeddingBundle {
  std::vector<std::string> ids;
  std::size_t channels = 0;
  std::size_t dim = 0;
  std::vector<std::string> channel_names;
  std::vector<float> values;

  std::size_t size() const { return ids.size(); }
  std::span<const float> item(std::size_t i) const {
    return std::span(values).subspan(i * channels * dim, channels * dim);
  }
  profile::ChannelProfile profile(std::size_t i) const;
  // Throws unless sizes agree and ids are unique and non-empty.
  void check() const;
};

std::string serialize_bundle(const EmbeddingBundle& b);
// Throws Errc::format on a malformed header or a tensor region whose byte
// length differs from 4·n·C·d (the message names both lengths).
EmbeddingBundle parse_bundle(std::string_view bytes, const std::string& source = "bundle");

void write_bundle(const std::filesystem::path& path, const EmbeddingBundle& b);
EmbeddingBundle read_bundle(const std::filesystem::path& path);

}  // namespace cellclip::harness
