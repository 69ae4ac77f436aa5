#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "autodiff/ops.hpp"
#include "loss/contrastive.hpp"
#include "support/gradcheck.hpp"
#include "text/prompt.hpp"
#include "text/text_encoder.hpp"
#include "text/tokenizer.hpp"
#include "util/error.hpp"

using namespace cellclip;
using namespace cellclip::text;

namespace {

double norm(const ad::Tensor& z) {
  double s = 0.0;
  for (float v : z.value()) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("text") {

TEST_CASE("prompts match the reference examples") {
  PerturbationRecord butyric{"butyric acid", PerturbationClass::compound, "U2OS", "CCCC(O)=O", "b1"};
  CHECK(build_prompt(butyric) ==
        "A cell painting image of U2OS cells treated with butyric acid, SMILES: CCCC(O)=O.");
  PerturbationRecord ap2s1{"AP2S1", PerturbationClass::crispr, "U2OS", "AP2S1", "b1"};
  CHECK(build_prompt(ap2s1) ==
        "A cell painting image of U2OS cells treated with CRISPR, targeting genes: AP2S1.");
  CHECK(build_prompt(ap2s1) == build_prompt(ap2s1));
}

TEST_CASE("prompt variants") {
  PerturbationRecord orf{"o1", PerturbationClass::orf, "U2OS", "KRAS; TP53", "b1"};
  CHECK(build_prompt(orf) ==
        "A cell painting image of U2OS cells treated with ORF, targeting genes: KRAS, TP53.");
  PerturbationRecord ctrl{"dmso", PerturbationClass::control, "U2OS", "", "b1"};
  CHECK(build_prompt(ctrl) == "A cell painting image of U2OS cells treated with control.");
  CHECK(build_prompt(orf, resolve_template("short")) ==
        "A U2OS treated with ORF, with targeting genes: KRAS, TP53.");
  CHECK(resolve_template("main") == kMainTemplate);
  CHECK(build_prompt(orf, "{perturbation} in {cell_type}") == "ORF in U2OS");

  PerturbationRecord missing{"c1", PerturbationClass::compound, "U2OS", "", "b1"};
  CHECK_THROWS_AS(build_prompt(missing), Error);
  CHECK(split_genes(" A , B;C ") == std::vector<std::string>{"A", "B", "C"});
  CHECK(parse_class("orf") == PerturbationClass::orf);
  CHECK_THROWS_AS(parse_class("rna"), Error);
}

TEST_CASE("tokenizer rule trace") {
  CHECK(split_tokens("AP2S1.") == std::vector<std::string>{"ap2s1", "."});
  CHECK(split_tokens("SMILES: CC(O)=O.") ==
        std::vector<std::string>{"smiles", ":", "c", "c", "(", "o", ")", "=", "o", "."});
  CHECK(split_tokens("  Hello,\tworld ") == std::vector<std::string>{"hello", ",", "world"});

  Vocabulary vocab;
  auto empty = tokenize("", vocab);
  CHECK(empty.ids.size() == kDefaultMaxLen);
  CHECK(empty.length() == 1);
  CHECK(empty.ids[0] == Vocabulary::kCls);
  CHECK(std::all_of(empty.ids.begin() + 1, empty.ids.end(), [](auto i) { return i == Vocabulary::kPad; }));

  std::vector<std::string> corpus{"AP2S1."};
  auto v2 = Vocabulary::build(corpus);
  auto seq = tokenize("AP2S1. zebra", v2);
  CHECK(seq.length() == 4);
  CHECK(seq.ids[1] == v2.id("ap2s1"));
  CHECK(seq.ids[2] == v2.id("."));
  CHECK(seq.ids[3] == Vocabulary::kUnk);
  CHECK(tokenize("AP2S1. zebra", v2).ids == seq.ids);

  auto truncated = tokenize("a b c d e f", vocab, 4);
  CHECK(truncated.ids.size() == 4);
  CHECK(truncated.length() == 4);
}

TEST_CASE("vocabulary ids depend only on the corpus multiset") {
  std::vector<std::string> a{"the cat sat", "a dog.", "the cat"};
  std::vector<std::string> b{"the cat", "a dog.", "the cat sat", "a dog."};
  auto va = Vocabulary::build(a), vb = Vocabulary::build(b);
  CHECK(va.tokens() == vb.tokens());
  CHECK(va.tokens()[0] == "[pad]");
  CHECK(va.tokens()[1] == "[unk]");
  CHECK(va.tokens()[2] == "[cls]");
  CHECK(std::is_sorted(va.tokens().begin() + 3, va.tokens().end()));
  auto round = Vocabulary::from_tokens(va.tokens());
  CHECK(round.tokens() == va.tokens());
  for (std::size_t i = 0; i < va.size(); ++i) CHECK(va.id(va.tokens()[i]) == i);
}

TEST_CASE("text encoder contracts") {
  std::vector<std::string> corpus{"A cell painting image of U2OS cells treated with CRISPR, targeting genes: AP2S1."};
  auto vocab = Vocabulary::build(corpus);
  Rng rng(11);
  TextEncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  TextEncoder<float> enc(cfg, rng);

  auto seq = tokenize(corpus[0], vocab);
  auto z = enc.encode(seq);
  CHECK(z.cols() == cfg.output_dim);
  CHECK(std::abs(norm(z) - 1.0) < 1e-5);
  auto z_again = enc.encode(tokenize(corpus[0], vocab));
  CHECK(std::equal(z.value().begin(), z.value().end(), z_again.value().begin()));

  // More padding never changes the latent.
  auto z_short = enc.encode(tokenize(corpus[0], vocab, 40));
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z.value()[i] - z_short.value()[i]) <= 1e-6);
  auto junk = seq;
  for (std::size_t i = seq.length(); i < junk.ids.size(); ++i) junk.ids[i] = 5;  // masked out
  auto z_junk = enc.encode(junk);
  CHECK(std::equal(z.value().begin(), z.value().end(), z_junk.value().begin()));

  // Permuting the real tokens changes the latent.
  auto perm = seq;
  std::reverse(perm.ids.begin() + 1, perm.ids.begin() + static_cast<std::ptrdiff_t>(seq.length()));
  auto z_perm = enc.encode(perm);
  double diff = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) diff += std::abs(z.value()[i] - z_perm.value()[i]);
  CHECK(diff > 1e-4);
}

TEST_CASE("text encoder gradient matches finite differences") {
  std::vector<std::string> corpus{"cells treated with cpd-001, SMILES: CCO.", "cells treated with ORF, targeting genes: G1."};
  auto vocab = Vocabulary::build(corpus);
  TextEncoderConfig cfg{vocab.size(), 8, 1, 2, 2, 24, 4};
  Rng init32(5), init64(5), rng(6);
  TextEncoder<float> enc32(cfg, init32);
  TextEncoder<double> enc64(cfg, init64);
  auto p32 = enc32.parameters();
  auto p64 = enc64.parameters();
  // O(1) values so finite differences are well conditioned.
  for (auto& p : p32) {
    const bool is_gain = p.name.ends_with("gain");
    for (auto& x : p.var.mutable_value()) x = static_cast<float>(is_gain ? 1.0 + 0.2 * rng.normal() : 0.4 * rng.normal());
  }
  testing::copy_params(p32, p64);

  std::vector<float> qf(2 * 4);
  for (auto& x : qf) x = static_cast<float>(rng.normal());
  auto q32 = ad::l2_normalize_rows(ad::Tensor::leaf({2, 4}, qf));
  auto q64 = ad::l2_normalize_rows(ad::Tensor64::leaf({2, 4}, std::vector<double>(qf.begin(), qf.end())));
  std::vector<TokenSequence> seqs;
  for (const auto& c : corpus) seqs.push_back(tokenize(c, vocab, cfg.max_len));

  std::function<ad::Tensor64()> f64 = [&] {
    std::vector<ad::Tensor64> z;
    for (const auto& s : seqs) z.push_back(enc64.encode(s));
    return loss::clip_loss(q64, ad::concat_rows<double>(z), ad::Tensor64::scalar(3.0));
  };
  std::function<ad::Tensor()> f32 = [&] {
    std::vector<ad::Tensor> z;
    for (const auto& s : seqs) z.push_back(enc32.encode(s));
    return loss::clip_loss(q32, ad::concat_rows<float>(z), ad::Tensor::scalar(3.0f));
  };
  auto v64 = testing::vars_of(p64);
  auto fd = testing::numeric_gradients(f64, v64, 1e-5);
  auto r64 = testing::compare(testing::analytic_gradients(f64, v64), fd);
  auto r32 = testing::compare(testing::analytic_gradients(f32, testing::vars_of(p32)), fd);
  INFO("worst f64 tensor: " << p64[r64.worst_index].name);
  INFO("worst f32 tensor: " << p32[r32.worst_index].name);
  CHECK(r64.worst < 1e-5);
  CHECK(r32.worst < 1e-3);
}

TEST_CASE("text encoder rejects bad token ids and configs") {
  Vocabulary vocab;
  Rng rng(12);
  TextEncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  TextEncoder<float> enc(cfg, rng);
  auto seq = tokenize("", vocab);
  seq.ids[1] = 99;
  seq.mask[1] = true;
  CHECK_THROWS_AS(enc.encode(seq), Error);
  TextEncoderConfig bad = cfg;
  bad.vocab_size = 0;
  CHECK_THROWS_AS((TextEncoder<float>(bad, rng)), Error);
}

}  // TEST_SUITE
