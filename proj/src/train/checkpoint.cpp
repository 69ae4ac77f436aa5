#include "train/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/io.hpp"

namespace cellclip::train {

namespace {

constexpr std::string_view kMagic = "cellclip-checkpoint 1";

std::string hex_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return fmt::format("{:a}", v);
}

double parse_hex_double(std::string_view key, std::string_view s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  if (s.size() < 2 || s.substr(0, 2) != "0x") fail(Errc::format, "{}: '{}' is not a hex float", key, s);
  s.remove_prefix(2);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(Errc::format, "{}: '{}' is not a hex float", key, s);
  return negative ? -v : v;
}

void put_f32(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::vector<float> to_float(std::span<const float> v) { return {v.begin(), v.end()}; }

}  // namespace

std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& train, const text::Vocabulary& vocab) {
  Fnv1a h;
  for (const auto& [k, v] : model.entries()) h.update("model." + k + "=" + v + "\n");
  for (const auto& [k, v] : train.entries()) h.update("train." + k + "=" + v + "\n");
  for (const auto& token : vocab.tokens()) h.update("vocab=" + token + "\n");
  return h.digest();
}

Checkpoint make_checkpoint(const CellClipModel<float>& model, const TrainConfig& train, const AdamState& adam,
                           const TrainerState& state) {
  Checkpoint c;
  c.model = model.config();
  c.train = train;
  c.vocab = model.vocabulary().tokens();
  c.state = state;
  c.config_hash = config_hash(c.model, c.train, model.vocabulary());
  const auto params = model.parameters();
  if (adam.m.size() != params.size() || adam.v.size() != params.size()) {
    fail(Errc::state, "optimizer state does not match the model parameters");
  }
  for (const auto& p : params) c.tensors.push_back({p.name, p.var.rows(), p.var.cols(), to_float(p.var.value())});
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.push_back({"adam.m/" + params[i].name, params[i].var.rows(), params[i].var.cols(), adam.m[i]});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.push_back({"adam.v/" + params[i].name, params[i].var.rows(), params[i].var.cols(), adam.v[i]});
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += kMagic;
  out += '\n';
  out += fmt::format("config_hash {}\n", hex64(ckpt.config_hash));
  out += fmt::format("state.step {}\n", ckpt.state.step);
  out += fmt::format("state.epoch_loss_sum {}\n", hex_double(ckpt.state.epoch_loss_sum));
  out += fmt::format("state.best_metric {}\n", hex_double(ckpt.state.best_metric));
  out += fmt::format("state.best_epoch {}\n", ckpt.state.best_epoch);
  for (const auto& [k, v] : ckpt.model.entries()) out += fmt::format("model.{} {}\n", k, v);
  for (const auto& [k, v] : ckpt.train.entries()) out += fmt::format("train.{} {}\n", k, v);
  out += fmt::format("vocab {}\n", ckpt.vocab.size());
  for (const auto& t : ckpt.vocab) {
    if (t.empty() || t.find_first_of("\n\r") != std::string::npos) fail(Errc::format, "vocabulary token cannot be stored");
    out += t;
    out += '\n';
  }
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != t.rows * t.cols) fail(Errc::shape, "tensor '{}' has {} values for {}x{}", t.name, t.values.size(), t.rows, t.cols);
    out += fmt::format("tensor {} {} {}\n", t.name, t.rows, t.cols);
  }
  out += "end\n";
  for (const auto& t : ckpt.tensors)
    for (float f : t.values) put_f32(out, f);
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) fail(Errc::format, "{}: truncated header after line {}", source, line_no);
    std::string_view line(bytes.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  auto split = [&](std::string_view line) {
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) fail(Errc::format, "{}:{}: expected '<key> <value>'", source, line_no);
    return std::pair{line.substr(0, sp), line.substr(sp + 1)};
  };

  if (next_line() != kMagic) fail(Errc::format, "{}: not a cellclip checkpoint", source);
  Checkpoint c;
  std::uint64_t stored_hash = 0;
  bool have_hash = false;
  std::size_t vocab_count = 0;
  for (;;) {
    const auto line = next_line();
    const auto [key, value] = split(line);
    if (key == "config_hash") {
      stored_hash = std::stoull(std::string(value), nullptr, 16);
      have_hash = true;
    } else if (key == "state.step") {
      c.state.step = parse_size(key, value);
    } else if (key == "state.epoch_loss_sum") {
      c.state.epoch_loss_sum = parse_hex_double(key, value);
    } else if (key == "state.best_metric") {
      c.state.best_metric = parse_hex_double(key, value);
    } else if (key == "state.best_epoch") {
      c.state.best_epoch = parse_size(key, value);
    } else if (key.starts_with("model.")) {
      if (!c.model.set(key.substr(6), value)) fail(Errc::format, "{}:{}: unknown key '{}'", source, line_no, key);
    } else if (key.starts_with("train.")) {
      if (!c.train.set(key.substr(6), value)) fail(Errc::format, "{}:{}: unknown key '{}'", source, line_no, key);
    } else if (key == "vocab") {
      vocab_count = parse_size(key, value);
      break;
    } else {
      fail(Errc::format, "{}:{}: unknown key '{}'", source, line_no, key);
    }
  }
  if (!have_hash) fail(Errc::format, "{}: missing config_hash", source);
  for (std::size_t i = 0; i < vocab_count; ++i) c.vocab.emplace_back(next_line());

  std::size_t total = 0;
  for (;;) {
    const auto line = next_line();
    if (line == "end") break;
    std::istringstream in{std::string(line)};
    std::string tag;
    NamedTensor t;
    if (!(in >> tag >> t.name >> t.rows >> t.cols) || tag != "tensor") {
      fail(Errc::format, "{}:{}: expected 'tensor <name> <rows> <cols>'", source, line_no);
    }
    total += t.rows * t.cols;
    c.tensors.push_back(std::move(t));
  }
  if (bytes.size() - pos != total * 4) {
    fail(Errc::format, "{}: expected {} bytes of tensor data, found {}", source, total * 4, bytes.size() - pos);
  }
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& t : c.tensors) {
    t.values.resize(t.rows * t.cols);
    for (auto& f : t.values) {
      f = get_f32(data);
      data += 4;
    }
  }
  c.model.validate();
  c.train.validate();
  const auto vocab = text::Vocabulary::from_tokens(c.vocab);
  c.config_hash = config_hash(c.model, c.train, vocab);
  if (c.config_hash != stored_hash) {
    fail(Errc::format, "{}: config hash {} does not match contents ({})", source, hex64(stored_hash), hex64(c.config_hash));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

namespace {

const NamedTensor& expect(const Checkpoint& c, std::size_t index, const std::string& name, std::size_t rows,
                          std::size_t cols) {
  if (index >= c.tensors.size()) fail(Errc::format, "checkpoint is missing tensor '{}'", name);
  const auto& t = c.tensors[index];
  if (t.name != name || t.rows != rows || t.cols != cols) {
    fail(Errc::format, "checkpoint tensor {} is '{}' {}x{}, expected '{}' {}x{}", index, t.name, t.rows, t.cols, name,
         rows, cols);
  }
  return t;
}

}  // namespace

CellClipModel<float> restore_model(const Checkpoint& ckpt) {
  CellClipModel<float> model(ckpt.model, text::Vocabulary::from_tokens(ckpt.vocab), 0);
  auto params = model.parameters();
  if (ckpt.tensors.size() != 3 * params.size()) {
    fail(Errc::format, "checkpoint holds {} tensors, model layout needs {}", ckpt.tensors.size(), 3 * params.size());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& t = expect(ckpt, i, p.name, p.var.rows(), p.var.cols());
    auto dst = p.var.mutable_value();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      if (!std::isfinite(t.values[j])) fail(Errc::numeric, "checkpoint tensor '{}' holds a non-finite value", p.name);
      dst[j] = t.values[j];
    }
  }
  return model;
}

AdamState restore_optimizer(const Checkpoint& ckpt, const CellClipModel<float>& model) {
  const auto params = model.parameters();
  AdamState s;
  s.step = ckpt.state.step;
  const std::size_t n = params.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = params[i];
    s.m.push_back(expect(ckpt, n + i, "adam.m/" + p.name, p.var.rows(), p.var.cols()).values);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = params[i];
    s.v.push_back(expect(ckpt, 2 * n + i, "adam.v/" + p.name, p.var.rows(), p.var.cols()).values);
  }
  return s;
}

}  // namespace cellclip::train
