#include "harness/run_config.hpp"

#include <cmath>

#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/io.hpp"

namespace cellclip::harness {

namespace {

template <class T, class F>
std::string join_values(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto c = s.find(',');
    out.push_back(trim(s.substr(0, c)));
    s = c == std::string_view::npos ? std::string_view{} : s.substr(c + 1);
  }
  return out;
}

}  // namespace

std::vector<double> parse_tails(std::string_view text) {
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto a = text.find(':');
    const auto b = text.find(':', a + 1);
    if (b == std::string_view::npos) fail(Errc::invalid_argument, "tail range '{}' must be start:stop:step", text);
    const double lo = parse_double("tails", text.substr(0, a));
    const double hi = parse_double("tails", text.substr(a + 1, b - a - 1));
    const double step = parse_double("tails", text.substr(b + 1));
    if (!(step > 0.0) || hi < lo) fail(Errc::invalid_argument, "tail range '{}' needs step > 0 and stop >= start", text);
    // Inclusive of stop up to rounding in the step count.
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  } else {
    for (auto part : split_commas(text)) out.push_back(parse_double("tails", part));
  }
  if (out.empty()) fail(Errc::invalid_argument, "no tail fractions given");
  for (double f : out)
    if (!(f > 0.0 && f <= 0.5)) fail(Errc::invalid_argument, "tail fraction {} outside (0, 0.5]", f);
  return out;
}

void EvalConfig::validate() const {
  if (permutations == 0) fail(Errc::invalid_argument, "eval.permutations must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::invalid_argument, "eval.alpha must lie in (0, 1)");
  if (kernel.degree < 1) fail(Errc::invalid_argument, "eval.kernel_degree must be at least 1");
  if (kernel.gamma < 0.0) fail(Errc::invalid_argument, "eval.kernel_gamma must be non-negative");
  if (tails.empty() || recall_ks.empty()) fail(Errc::invalid_argument, "eval.tails and eval.recall_ks must be non-empty");
  for (auto k : recall_ks)
    if (k == 0) fail(Errc::invalid_argument, "eval.recall_ks entries must be positive");
}

KvList EvalConfig::entries() const {
  return {
      {"permutations", std::to_string(permutations)},
      {"alpha", format_double(alpha)},
      {"seed", std::to_string(seed)},
      {"kernel", std::string(eval::kernel_name(kernel.type))},
      {"kernel_gamma", format_double(kernel.gamma)},
      {"kernel_degree", std::to_string(kernel.degree)},
      {"kernel_coef0", format_double(kernel.coef0)},
      {"kernel_components", std::to_string(kernel.components)},
      {"aggregate", aggregate == eval::Aggregate::mean ? "mean" : "median"},
      {"tails", join_values(tails, [](double x) { return format_double(x); })},
      {"recall_ks", join_values(recall_ks, [](std::size_t x) { return std::to_string(x); })},
  };
}

bool EvalConfig::set(std::string_view key, std::string_view value) {
  if (key == "permutations") permutations = parse_size(key, value);
  else if (key == "alpha") alpha = parse_double(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "kernel") kernel.type = eval::parse_kernel(value);
  else if (key == "kernel_gamma") kernel.gamma = parse_double(key, value);
  else if (key == "kernel_degree") kernel.degree = static_cast<int>(parse_i64(key, value));
  else if (key == "kernel_coef0") kernel.coef0 = parse_double(key, value);
  else if (key == "kernel_components") kernel.components = parse_size(key, value);
  else if (key == "aggregate") {
    if (value == "mean") aggregate = eval::Aggregate::mean;
    else if (value == "median") aggregate = eval::Aggregate::median;
    else fail(Errc::invalid_argument, "eval.aggregate must be mean or median, got '{}'", value);
  } else if (key == "tails") tails = parse_tails(value);
  else if (key == "recall_ks") {
    recall_ks.clear();
    for (auto part : split_commas(value)) recall_ks.push_back(parse_size(key, part));
  } else return false;
  return true;
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.model.image = {5, 32, 64, 2, 4, 4, 64};
  c.model.text_width = 64;
  c.model.text_layers = 2;
  c.model.text_heads = 4;
  c.train.batch_size = 8;
  c.train.lr_max = 1e-3;
  c.train.warmup_steps = 25;
  c.train.epochs = 50;
  return c;
}

void RunConfig::validate() const {
  synth.validate();
  model.validate();
  train.validate();
  eval.validate();
}

KvList RunConfig::entries() const {
  KvList out;
  auto add = [&](const char* prefix, const KvList& list) {
    for (const auto& [k, v] : list) out.emplace_back(std::string(prefix) + k, v);
  };
  add("synth.", synth.entries());
  add("model.", model.entries());
  add("train.", train.entries());
  add("eval.", eval.entries());
  return out;
}

void RunConfig::apply(const KvList& entries) {
  for (const auto& [key, value] : entries) {
    const auto dot = key.find('.');
    const std::string_view section = dot == std::string::npos ? std::string_view{} : std::string_view(key).substr(0, dot);
    const std::string_view name = dot == std::string::npos ? std::string_view{} : std::string_view(key).substr(dot + 1);
    bool known = false;
    if (section == "synth") known = synth.set(name, value);
    else if (section == "model") known = model.set(name, value);
    else if (section == "train") known = train.set(name, value);
    else if (section == "eval") known = eval.set(name, value);
    if (!known) fail(Errc::invalid_argument, "unknown config key '{}'", key);
  }
}

void RunConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  train.seed = seed;
  eval.seed = seed;
}

std::uint64_t RunConfig::hash() const { return fnv1a(text()); }

std::string RunConfig::text() const { return format_kv(entries()); }

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = RunConfig::desk();
  c.apply(parse_kv(read_file(path), path.string()));
  c.validate();
  return c;
}

}  // namespace cellclip::harness
