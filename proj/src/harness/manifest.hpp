#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "harness/run_config.hpp"

namespace cellclip::harness {

inline constexpr const char* kVersion = "0.1.0";

// Written next to every command's outputs. Holds the argv and full config,
// so re-running the recorded argv against the recorded inputs reproduces the
// outputs, whose digests are listed for checking.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  std::string started_at;
  std::string finished_at;
  std::size_t threads = 1;
};

// 16 hex digits of FNV-1a over the file bytes; for a directory, over the
// sorted (name, digest) list of its regular files.
std::string digest_path(const std::filesystem::path& path);
std::string utc_now();

std::string format_manifest(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
// The recorded argv, for re-running a command.
std::vector<std::string> read_manifest_argv(const std::filesystem::path& path);

}  // namespace cellclip::harness
