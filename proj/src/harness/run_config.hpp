#pragma once

// Run configuration: "key = value" lines with '#' comments, keys prefixed by
// section (synth., model., train., eval.). Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eval/batch_correct.hpp"
#include "eval/biology.hpp"
#include "harness/synth.hpp"
#include "train/config.hpp"

namespace cellclip::harness {

struct EvalConfig {
  std::size_t permutations = eval::kDeskPermutations;
  double alpha = eval::kDefaultAlpha;
  std::uint64_t seed = 0;
  eval::KernelConfig kernel;
  eval::Aggregate aggregate = eval::Aggregate::mean;
  std::vector<double> tails{0.1};
  std::vector<std::size_t> recall_ks{1, 5, 10};

  void validate() const;
  KvList entries() const;
  bool set(std::string_view key, std::string_view value);
};

struct RunConfig {
  SynthConfig synth;
  train::ModelConfig model;
  train::TrainConfig train;
  EvalConfig eval;

  // Desk-scale defaults: C=5, d=32, width 64, 2 layers, 4 heads, output 64,
  // batch 8, lr 1e-3, warmup 25, 50 epochs.
  static RunConfig desk();

  void validate() const;
  KvList entries() const;  // prefixed, fixed order
  // Throws Errc::invalid_argument on an unknown key.
  void apply(const KvList& entries);
  // Sets synth.seed, train.seed and eval.seed.
  void set_seed(std::uint64_t seed);
  std::uint64_t hash() const;
  std::string text() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// "a:b:step" or a comma-separated list of fractions.
std::vector<double> parse_tails(std::string_view text);

}  // namespace cellclip::harness
