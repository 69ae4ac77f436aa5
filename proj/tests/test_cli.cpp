// Links only the shared library; the CLI runs as a child process.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cellclip/cellclip.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support/temp_dir.hpp"

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CELLCLIP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> tsv_rows(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

// A screen and model small enough for a few seconds of training.
const char* kSmallConfig =
    "synth.channels = 2\n"
    "synth.dim = 6\n"
    "model.channels = 2\n"
    "model.input_dim = 6\n"
    "model.width = 16\n"
    "model.layers = 1\n"
    "model.heads = 2\n"
    "model.output_dim = 8\n"
    "model.attention_hidden = 8\n"
    "model.text_width = 16\n"
    "model.text_layers = 1\n"
    "model.text_heads = 2\n"
    "train.epochs = 2\n"
    "train.warmup_steps = 2\n"
    "eval.permutations = 50\n";

}  // namespace

TEST_CASE("capi: config keys, errors and hashing") {
  cellclip_config* cfg = nullptr;
  REQUIRE(cellclip_config_new(&cfg) == CELLCLIP_OK);
  uint64_t h0 = 0, h1 = 0;
  CHECK(cellclip_config_hash(cfg, &h0) == CELLCLIP_OK);
  CHECK(cellclip_config_set(cfg, "train.epochs", "3") == CELLCLIP_OK);
  CHECK(cellclip_config_hash(cfg, &h1) == CELLCLIP_OK);
  CHECK(h0 != h1);

  size_t needed = 0;
  CHECK(cellclip_config_get(cfg, "train.epochs", nullptr, 0, &needed) == CELLCLIP_OK);
  CHECK(needed == 2);
  char buf[8];
  CHECK(cellclip_config_get(cfg, "train.epochs", buf, sizeof buf, &needed) == CELLCLIP_OK);
  CHECK(std::string(buf) == "3");
  char tiny[1];
  CHECK(cellclip_config_get(cfg, "model.loss", tiny, 1, &needed) == CELLCLIP_ERR_INVALID_ARGUMENT);
  CHECK(needed == 6);

  CHECK(cellclip_config_set(cfg, "train.bogus", "1") == CELLCLIP_ERR_INVALID_ARGUMENT);
  CHECK(std::string(cellclip_last_error()).find("train.bogus") != std::string::npos);
  CHECK(cellclip_config_set(cfg, "train.epochs", "x") == CELLCLIP_ERR_FORMAT);
  CHECK(cellclip_config_set(cfg, "train.epochs", "0") == CELLCLIP_OK);
  CHECK(cellclip_config_validate(cfg) == CELLCLIP_ERR_INVALID_ARGUMENT);
  CHECK(cellclip_config_set(nullptr, "a", "b") == CELLCLIP_ERR_INVALID_ARGUMENT);
  cellclip_config_free(cfg);

  cellclip_config* missing = nullptr;
  CHECK(cellclip_config_load("/nonexistent/run.cfg", &missing) == CELLCLIP_ERR_IO);
  CHECK(missing == nullptr);
  CHECK(std::string(cellclip_status_name(CELLCLIP_ERR_VALIDATION)) == "validation");
}

TEST_CASE("capi: average precision and recall agree with hand values") {
  const int rel[] = {1, 0, 1, 0};
  double ap = 0;
  REQUIRE(cellclip_average_precision(rel, 4, &ap) == CELLCLIP_OK);
  CHECK(ap == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));

  // Row 0 ranks its match first, row 1 second, row 2 third.
  const double sim[] = {0.9, 0.1, 0.0,   //
                        0.8, 0.5, 0.0,   //
                        0.7, 0.6, 0.1};
  double r1 = 0, r2 = 0;
  REQUIRE(cellclip_recall_at_k(sim, 3, 1, &r1) == CELLCLIP_OK);
  REQUIRE(cellclip_recall_at_k(sim, 3, 2, &r2) == CELLCLIP_OK);
  CHECK(r1 == doctest::Approx(1.0 / 3.0));
  CHECK(r2 == doctest::Approx(2.0 / 3.0));
  CHECK(cellclip_recall_at_k(sim, 3, 0, &r1) != CELLCLIP_OK);
}

TEST_CASE("cli: usage errors exit 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("synth --no-such-flag") == 2);
  CHECK(run_cli("eval") == 2);
  CHECK(run_cli("eval retrieval") == 2);
  CHECK(run_cli("--threads 0 synth") == 2);
  CHECK(run_cli("--set train.bogus=1 synth") == 2);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: synth, validate, train, evaluate and rerun from a manifest") {
  cellclip::testing::TempDir dir("cli");
  { std::ofstream(dir / "small.cfg") << kSmallConfig; }
  const std::string cfg = "--config " + (dir / "small.cfg").string() + " --seed 4 -q";
  const auto data = (dir / "data").string();
  const auto run = (dir / "run").string();
  const auto emb = run + "/embeddings.tsv";

  REQUIRE(run_cli(cfg + " --out " + data + " synth") == 0);
  CHECK(run_cli(cfg + " --out " + data + " validate --data " + data) == 0);
  REQUIRE(run_cli(cfg + " --out " + run + " train --data " + data) == 0);
  REQUIRE(run_cli(cfg + " --out " + run + " embed --data " + data + " --checkpoint " + run + "/best.ckpt") == 0);
  REQUIRE(run_cli(cfg + " --out " + run + " eval retrieval --data " + data + " --embeddings " + emb) == 0);
  REQUIRE(run_cli(cfg + " --out " + run + " eval genegene --data " + data + " --embeddings " + emb +
                  " --tails 0.02:0.20:0.02") == 0);
  CHECK(run_cli(cfg + " --out " + run + " eval map --data " + data + " --embeddings " + emb) == 0);
  CHECK(run_cli(cfg + " --out " + run + " batch-correct --embeddings " + emb) == 0);
  CHECK(run_cli(cfg + " --out " + run + " report --data " + data + " --embeddings " + emb) == 0);

  std::vector<std::string> metrics;
  for (const auto& r : tsv_rows(run + "/retrieval.tsv")) metrics.push_back(r.at(2));
  CHECK(metrics == std::vector<std::string>{"recall@1/image_to_text", "recall@1/text_to_image", "recall@5/image_to_text",
                                            "recall@5/text_to_image", "recall@10/image_to_text", "recall@10/text_to_image"});
  std::map<std::string, int> per_source;
  for (const auto& r : tsv_rows(run + "/genegene.tsv")) ++per_source[r.at(1)];
  CHECK(per_source == std::map<std::string, int>{{"all", 10}, {"cluster", 10}, {"modifier", 10}});

  SUBCASE("a manifest replays its command bit-exactly") {
    const auto ckpt = slurp(run + "/best.ckpt");
    const auto log = slurp(run + "/train_log.tsv");
    const auto gg = slurp(run + "/genegene.tsv");
    std::filesystem::remove(run + "/best.ckpt");
    std::filesystem::remove(run + "/genegene.tsv");
    CHECK(run_cli("rerun " + run + "/manifest_train.json") == 0);
    CHECK(slurp(run + "/best.ckpt") == ckpt);
    CHECK(slurp(run + "/train_log.tsv") == log);
    CHECK(run_cli("rerun " + run + "/manifest_eval_genegene.json") == 0);
    CHECK(slurp(run + "/genegene.tsv") == gg);
  }

  SUBCASE("validation failures exit 1") {
    const auto bundle = dir / "data" / "profiles.bundle";
    auto bytes = slurp(bundle);
    { std::ofstream(bundle, std::ios::binary) << bytes.substr(0, bytes.size() - 4); }
    CHECK(run_cli(cfg + " --out " + data + " validate --data " + data) == 1);
  }

  SUBCASE("a loaded model embeds unit vectors deterministically") {
    cellclip_model* model = nullptr;
    REQUIRE(cellclip_model_load((run + "/best.ckpt").c_str(), &model) == CELLCLIP_OK);
    size_t out = 0, channels = 0, dim = 0;
    REQUIRE(cellclip_model_dims(model, &out, &channels, &dim) == CELLCLIP_OK);
    CHECK(out == 8);
    CHECK(channels == 2);
    CHECK(dim == 6);
    std::vector<float> bag(3 * channels * dim);
    for (size_t i = 0; i < bag.size(); ++i) bag[i] = std::sin(0.37f * static_cast<float>(i));
    std::vector<float> a(out), b(out), t(out);
    REQUIRE(cellclip_model_embed_bag(model, bag.data(), 3, a.data()) == CELLCLIP_OK);
    REQUIRE(cellclip_model_embed_bag(model, bag.data(), 3, b.data()) == CELLCLIP_OK);
    CHECK(a == b);
    double norm = 0;
    for (float x : a) norm += double(x) * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
    REQUIRE(cellclip_model_embed_prompt(model, "cells treated with cpd-001", t.data()) == CELLCLIP_OK);
    CHECK(cellclip_model_embed_bag(model, bag.data(), 0, a.data()) == CELLCLIP_ERR_INVALID_ARGUMENT);
    cellclip_model_free(model);
  }
}
