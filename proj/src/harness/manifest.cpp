#include "harness/manifest.hpp"

#include <chrono>
#include <ctime>

#include <fmt/chrono.h>
#include <json.hpp>

#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/io.hpp"

namespace cellclip::harness {

std::string digest_path(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.emplace_back(entry.path().filename().string(), digest_path(entry.path()));
    }
    std::sort(files.begin(), files.end());
    Fnv1a h;
    for (const auto& [name, digest] : files) h.update(name + "\t" + digest + "\n");
    return hex64(h.digest());
  }
  return hex64(fnv1a(read_file(path)));
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string format_manifest(const Manifest& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["version"] = kVersion;
  j["config_hash"] = hex64(m.config.hash());
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : m.config.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = {{"synth", m.config.synth.seed}, {"train", m.config.train.seed}, {"eval", m.config.eval.seed}};
  j["loss"] = std::string(train::loss_name(m.config.model.loss));
  j["kernel"] = std::string(eval::kernel_name(m.config.eval.kernel.type));
  j["threads"] = m.threads;
  auto files = [](const auto& list) {
    ordered_json arr = ordered_json::array();
    for (const auto& [path, digest] : list) arr.push_back({{"path", path}, {"fnv1a64", digest}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  return j.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) { write_file(path, format_manifest(m)); }

std::vector<std::string> read_manifest_argv(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    return j.at("argv").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "{}: not a run manifest ({})", path.string(), e.what());
  }
}

}  // namespace cellclip::harness
