#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "eval/batch_correct.hpp"
#include "eval/biology.hpp"
#include "eval/retrieval.hpp"
#include "eval/significance.hpp"
#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/rng.hpp"

using namespace cellclip;
using namespace cellclip::eval;

namespace {

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

SimilarityMatrix random_square(Rng& rng, std::size_t n) {
  SimilarityMatrix s;
  for (std::size_t i = 0; i < n; ++i) {
    s.row_ids.push_back(fmt::format("q{:04d}", i));
  }
  s.col_ids = s.row_ids;
  s.s.resize(n * n);
  for (auto& v : s.s) v = 2.0 * rng.uniform() - 1.0;
  return s;
}

// Brute-force AP via independent precision/recall curve bookkeeping.
double ap_oracle(const std::vector<bool>& rel) {
  const double total = static_cast<double>(std::count(rel.begin(), rel.end(), true));
  double prev_recall = 0.0, ap = 0.0, hits = 0.0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    hits += rel[k];
    const double recall = hits / total, precision = hits / static_cast<double>(k + 1);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - p[i]);
    d = std::max(d, p[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("recall examples and properties") {
  SimilarityMatrix dom{{"a", "b", "c"}, {"a", "b", "c"}, {0.9, 0.1, 0.2, 0.0, 0.5, 0.4, -0.3, 0.2, 0.7}};
  CHECK(recall_at_k(dom, 1) == 1.0);
  Rng rng(1);
  auto s = random_square(rng, 30);
  CHECK(recall_at_k(s, 30) == 1.0);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 30; ++k) {
    const double r = recall_at_k(s, k);
    CHECK(r >= prev);
    prev = r;
  }
  CHECK_THROWS_AS(recall_at_k(s, 0), Error);
  CHECK_THROWS_AS(recall_at_k(s, 31), Error);
  SimilarityMatrix mismatch{{"a", "b"}, {"a", "z"}, {1, 0, 0, 1}};
  CHECK_THROWS_AS(recall_at_k(mismatch, 1), Error);

  // Ties go to the smaller candidate id.
  SimilarityMatrix ties{{"a", "b"}, {"a", "b"}, {0.5, 0.5, 0.5, 0.5}};
  CHECK(rank_of_match(ties, 0) == 1);
  CHECK(rank_of_match(ties, 1) == 2);
}

TEST_CASE("recall is invariant to candidate order") {
  Rng rng(2);
  auto s = random_square(rng, 20);
  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  SimilarityMatrix p{s.row_ids, {}, std::vector<double>(400)};
  for (std::size_t j = 0; j < 20; ++j) p.col_ids.push_back(s.col_ids[perm[j]]);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) p.s[i * 20 + j] = s.at(i, perm[j]);
  for (std::size_t k : {1u, 3u, 10u}) CHECK(recall_at_k(p, k) == recall_at_k(s, k));
}

TEST_CASE("random similarity gives recall k/N") {
  Rng rng(3);
  const std::size_t n = 100, trials = 1000;
  for (std::size_t k : {1u, 5u, 10u}) {
    double total = 0.0;
    for (std::size_t t = 0; t < trials; ++t) total += recall_at_k(random_square(rng, n), k);
    const double mean = total / trials, p = static_cast<double>(k) / n;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n * trials));
    CHECK(std::abs(mean - p) <= 3 * sigma);
  }
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({true, true, false, false}) == 1.0);
  CHECK(average_precision({true, false, true}) == 5.0 / 6.0);
  for (std::size_t r = 1; r <= 7; ++r) {
    std::vector<bool> rel(7, false);
    rel[r - 1] = true;
    CHECK(average_precision(rel) == doctest::Approx(1.0 / r).epsilon(1e-15));
  }
  CHECK_THROWS_AS(average_precision({false, false}), Error);

  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<bool> rel(1 + rng.below(30));
    for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = rng.uniform() < 0.3;
    rel[rng.below(rel.size())] = true;
    const double ap = average_precision(rel);
    CHECK(ap == doctest::Approx(ap_oracle(rel)).epsilon(1e-12));
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("ranking sorts by similarity then id") {
  std::vector<std::string> ids{"c", "a", "b", "d"};
  std::vector<double> sims{0.5, 0.5, 0.9, -0.1};
  auto r = rank_candidates(ids, sims, {false, true, false, true});
  CHECK(r.ids == std::vector<std::string>{"b", "a", "c", "d"});
  CHECK(r.relevant == std::vector<bool>{false, true, false, true});
}

TEST_CASE("permutation p-value examples") {
  const std::size_t n = 200;
  std::vector<bool> worst{false, false, false, true, true};
  CHECK(permutation_pvalue(worst, n, 1, 2) >= 1.0 - 1.0 / (n + 1));

  // n=5 with 2 relevant: 10 equally likely placements, one of which is perfect.
  std::vector<bool> best{true, true, false, false, false};
  const std::size_t big = 20000;
  const double p = permutation_pvalue(best, big, 1, 3);
  const double exact = (1.0 + big * 0.1) / (big + 1.0);
  CHECK(std::abs(p - exact) < 4 * std::sqrt(0.1 * 0.9 / big));

  std::vector<bool> long_best(60, false);
  long_best[0] = long_best[1] = true;
  CHECK(permutation_pvalue(long_best, 1000, 1, 4) < 5.0 / 1001);
  CHECK(permutation_pvalue(best, 50, 9, 9) == permutation_pvalue(best, 50, 9, 9));
  CHECK_THROWS_AS(permutation_pvalue(best, 0, 1, 1), Error);
}

TEST_CASE("permutation p-values are calibrated under the null") {
  // The KS check is itself a 5% test; this seed is fixed, not tuned.
  Rng rng(1000);
  std::vector<double> p;
  for (std::size_t q = 0; q < 500; ++q) {
    std::vector<bool> rel(40, false);
    for (std::size_t i = 0; i < 8; ++i) rel[i] = true;
    rng.shuffle(rel.begin(), rel.end());
    p.push_back(permutation_pvalue(rel, 2000, 77, q));
  }
  CHECK(ks_uniform(p) < 1.358 / std::sqrt(500.0));
}

TEST_CASE("Benjamini-Hochberg examples") {
  std::vector<double> p{0.01, 0.04, 0.03, 0.20};
  CHECK(benjamini_hochberg(p, 0.05) == std::vector<bool>{true, false, false, false});
  std::vector<double> zeros(5, 0.0), ones(5, 1.0);
  CHECK(benjamini_hochberg(zeros) == std::vector<bool>(5, true));
  CHECK(benjamini_hochberg(ones) == std::vector<bool>(5, false));
  std::vector<double> step{0.01, 0.02, 0.03, 0.04};
  CHECK(benjamini_hochberg(step, 0.05) == std::vector<bool>(4, true));
  std::vector<double> bad{1.5};
  CHECK_THROWS_AS(benjamini_hochberg(bad), Error);
}

TEST_CASE("linear kernel PCA equals centered PCA") {
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd x(10, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * (1 + (i % 4));
    KernelPca pca;
    pca.fit(x, KernelConfig{});
    Eigen::MatrixXd z = pca.transform(x);

    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
    Eigen::MatrixXd oracle = xc * svd.matrixV();
    for (Eigen::Index c = 0; c < oracle.cols(); ++c) {
      Eigen::Index arg;
      oracle.col(c).cwiseAbs().maxCoeff(&arg);
      if (oracle(arg, c) < 0) oracle.col(c) *= -1;
    }
    REQUIRE(z.cols() == 4);
    CHECK((z - oracle).cwiseAbs().maxCoeff() < 1e-5);

    Eigen::MatrixXd fresh(3, 4);
    for (Eigen::Index i = 0; i < fresh.size(); ++i) fresh.data()[i] = rng.normal();
    Eigen::MatrixXd zf = pca.transform(fresh);
    Eigen::MatrixXd of = (fresh.rowwise() - mean) * svd.matrixV();
    for (Eigen::Index c = 0; c < 4; ++c) {
      const double sign = (z.col(c).dot(xc * svd.matrixV().col(c)) >= 0) ? 1.0 : -1.0;
      CHECK((zf.col(c) - sign * of.col(c)).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("kernel PCA rejects a singular control set") {
  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3);
  KernelPca pca;
  CHECK_THROWS_AS(pca.fit(same, KernelConfig{}), Error);
  CHECK(parse_kernel("rbf") == KernelType::rbf);
  CHECK_THROWS_AS(parse_kernel("cubic"), Error);
}

TEST_CASE("batch correction post-conditions") {
  Rng rng(7);
  for (auto kernel : {KernelType::linear, KernelType::rbf, KernelType::polynomial}) {
    ScreenEmbeddings s;
    for (int b = 0; b < 3; ++b) {
      auto offset = gaussian(rng, 6, 2.0);
      for (int k = 0; k < 8; ++k) {
        auto v = gaussian(rng, 6);
        for (int j = 0; j < 6; ++j) v[j] += offset[j];
        const bool ctrl = k < 5;
        s.push_back(ctrl ? "ctrl" : fmt::format("p{}", k), fmt::format("b{}", b), ctrl, v);
      }
    }
    KernelConfig cfg;
    cfg.type = kernel;
    if (kernel != KernelType::linear) cfg.components = 4;
    auto out = batch_correct(s, cfg);
    for (int b = 0; b < 3; ++b) {
      for (std::size_t j = 0; j < out.table.dim; ++j) {
        double m = 0.0, v = 0.0;
        std::vector<double> col;
        for (std::size_t i = 0; i < out.size(); ++i)
          if (out.control[i] && out.batch[i] == fmt::format("b{}", b)) col.push_back(out.table.values[i * out.table.dim + j]);
        for (double x : col) m += x / col.size();
        for (double x : col) v += (x - m) * (x - m) / col.size();
        CHECK(std::abs(m) < 1e-5);
        CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-5);
      }
    }
  }
}

TEST_CASE("planted per-batch offsets are removed") {
  Rng rng(8);
  std::vector<std::vector<double>> base;
  for (int k = 0; k < 6; ++k) base.push_back(gaussian(rng, 5));
  ScreenEmbeddings s;
  for (int b = 0; b < 4; ++b) {
    auto offset = gaussian(rng, 5, 3.0);
    for (int k = 0; k < 6; ++k) {
      std::vector<double> v(5);
      for (int j = 0; j < 5; ++j) v[j] = base[k][j] + offset[j];
      s.push_back("ctrl", fmt::format("b{}", b), true, v);
    }
  }
  auto out = batch_correct(s, KernelConfig{});
  double worst = 0.0;
  for (int k = 0; k < 6; ++k) {
    for (int b = 1; b < 4; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < out.table.dim; ++j) {
        const double a = out.table.values[static_cast<std::size_t>(k) * out.table.dim + j];
        const double c = out.table.values[(static_cast<std::size_t>(b) * 6 + k) * out.table.dim + j];
        d2 += (a - c) * (a - c);
      }
      worst = std::max(worst, std::sqrt(d2));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("single-batch linear correction is PCA plus global standardization") {
  Rng rng(9);
  ScreenEmbeddings s;
  Eigen::MatrixXd ctrl(8, 3);
  for (int k = 0; k < 12; ++k) {
    auto v = gaussian(rng, 3);
    if (k < 8) ctrl.row(k) = Eigen::Map<Eigen::RowVectorXd>(v.data(), 3);
    s.push_back(k < 8 ? "ctrl" : "p", "only", k < 8, v);
  }
  auto out = batch_correct(s, KernelConfig{});
  const Eigen::RowVectorXd mean = ctrl.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrl.rowwise() - mean, Eigen::ComputeThinV);
  Eigen::MatrixXd all = to_matrix(s.table);
  Eigen::MatrixXd proj = (all.rowwise() - mean) * svd.matrixV();
  Eigen::MatrixXd cp = proj.topRows(8);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::Index arg;
    cp.col(c).cwiseAbs().maxCoeff(&arg);
    if (cp(arg, c) < 0) proj.col(c) *= -1;
    const double sd = std::sqrt(proj.col(c).head(8).array().square().mean());
    proj.col(c) /= sd;
  }
  CHECK((to_matrix(out.table) - proj).cwiseAbs().maxCoeff() < 1e-9);

  ScreenEmbeddings lonely;
  lonely.push_back("ctrl", "b0", true, gaussian(rng, 3));
  lonely.push_back("p", "b0", false, gaussian(rng, 3));
  CHECK_THROWS_AS(batch_correct(lonely, KernelConfig{}), Error);
}

TEST_CASE("replicate detection examples") {
  // Identical replicates across batches, controls orthogonal.
  ScreenEmbeddings s;
  for (int b = 0; b < 3; ++b) {
    s.push_back("p1", fmt::format("b{}", b), false, std::vector<double>{1, 0, 0, 0});
    s.push_back("p2", fmt::format("b{}", b), false, std::vector<double>{0, 1, 0, 0});
    s.push_back("ctrl", fmt::format("b{}", b), true, std::vector<double>{0, 0, 1, 0});
    s.push_back("ctrl", fmt::format("b{}", b), true, std::vector<double>{0, 0, 0.5, 1});
  }
  s.push_back("solo", "b0", false, std::vector<double>{1, 1, 0, 0});
  MapOptions opt{500, 0.05, 1};
  auto r = replicate_detection_map(s, opt, {{"p1", "compound"}, {"p2", "orf"}});
  CHECK(r.map == 1.0);
  CHECK(r.queries.size() == 6);
  CHECK(r.skipped == std::vector<std::string>{"solo"});
  CHECK(r.per_class.at("compound") == 1.0);
  CHECK(r.per_perturbation.at("p2") == 1.0);
}

TEST_CASE("replicate detection under the null matches the random baseline") {
  Rng rng(10);
  double total = 0.0, baseline = 0.0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    ScreenEmbeddings s;
    for (int b = 0; b < 3; ++b) {
      for (int p = 0; p < 4; ++p) s.push_back(fmt::format("p{}", p), fmt::format("b{}", b), false, gaussian(rng, 8));
      for (int c = 0; c < 6; ++c) s.push_back("ctrl", fmt::format("b{}", b), true, gaussian(rng, 8));
    }
    auto r = replicate_detection_map(s, MapOptions{200, 0.05, static_cast<std::uint64_t>(t)});
    total += r.map;
    // Expected AP of 2 relevant among 20 under uniform placement.
    double e = 0.0;
    std::vector<bool> rel(20, false);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j) {
        std::fill(rel.begin(), rel.end(), false);
        rel[i] = rel[j] = true;
        e += average_precision(rel);
      }
    baseline += e / 190.0;
  }
  // Monte-Carlo band: per-run mAP has sd near 0.06, 40 runs.
  CHECK(std::abs(total / trials - baseline / trials) < 0.04);
}

TEST_CASE("significance filtering drops non-significant queries") {
  Rng rng(11);
  ScreenEmbeddings s;
  for (int b = 0; b < 2; ++b) {
    s.push_back("strong", fmt::format("b{}", b), false, std::vector<double>{5, 0, 0, 0, 0, 0});
    s.push_back("weak", fmt::format("b{}", b), false, gaussian(rng, 6));
    for (int c = 0; c < 30; ++c) s.push_back("ctrl", fmt::format("b{}", b), true, gaussian(rng, 6, 0.2));
  }
  auto r = replicate_detection_map(s, MapOptions{1000, 0.05, 3});
  for (const auto& q : r.queries) {
    if (q.id == "strong") CHECK(q.significant);
    if (!q.significant) CHECK(q.pvalue > 0.05 * 0.5);
  }
  CHECK(r.retained_fraction <= 1.0);
  CHECK(r.map_filtered >= 0.0);
}

TEST_CASE("sister matching examples") {
  ScreenEmbeddings s;
  auto add = [&](const std::string& id, std::vector<double> v) {
    s.push_back(id, "b0", false, v);
    s.push_back(id, "b1", false, v);
  };
  add("c1", {1, 0, 0, 0, 0});
  add("c2", {1, 0, 0, 0, 0});
  add("c3", {0, 1, 0, 0, 0});
  add("k1", {0, 0, 1, 0, 0});
  add("k2", {0, 0, 0, 1, 0});
  std::map<std::string, std::set<std::string>> genes{
      {"c1", {"A"}}, {"c2", {"A"}}, {"c3", {"B"}}, {"k1", {"A"}}, {"k2", {"B"}}};
  std::map<std::string, std::string> cls{
      {"c1", "compound"}, {"c2", "compound"}, {"c3", "compound"}, {"k1", "crispr"}, {"k2", "crispr"}};
  MapOptions opt{200, 0.05, 1};
  auto within = sister_matching_map(s, genes, cls, SisterMode::within, opt);
  REQUIRE(within.per_perturbation.count("c1"));
  CHECK(within.per_perturbation.at("c1") == 1.0);
  CHECK(within.per_perturbation.at("c2") == 1.0);
  CHECK(std::count(within.skipped.begin(), within.skipped.end(), "c3") == 1);

  auto across = sister_matching_map(s, genes, cls, SisterMode::across, opt);
  for (const auto& q : across.queries) {
    // Across-class candidates never include the same class.
    if (q.id == "c1") CHECK(q.candidates == 2);
    if (q.id == "k1") CHECK(q.candidates == 3);
  }
  auto missing = genes;
  missing.erase("k2");
  CHECK_THROWS_AS(sister_matching_map(s, missing, cls, SisterMode::within, opt), Error);
}

TEST_CASE("planted sisters match a brute-force ranking oracle") {
  Rng rng(12);
  // 20 perturbations in 5 sister groups of 4; sisters share a direction at cosine 0.9.
  ScreenEmbeddings s;
  std::map<std::string, std::set<std::string>> genes;
  std::map<std::string, std::string> cls;
  const std::size_t dim = 40;
  std::vector<std::vector<double>> vecs;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(dim, 0.0);
    const int g = i / 4, k = i % 4;
    v[g] = 3.0;            // shared
    v[5 + i] = 1.0;        // private
    v[30 + k % 2] = 0.01;  // tiny jitter
    const std::string id = fmt::format("s{:02d}", i);
    vecs.push_back(v);
    s.push_back(id, "b0", false, v);
    genes[id] = {fmt::format("G{}", g)};
    cls[id] = "compound";
  }
  auto r = sister_matching_map(s, genes, cls, SisterMode::within, MapOptions{100, 0.05, 1});
  for (int i = 0; i < 20; ++i) {
    std::vector<std::pair<double, std::string>> cand;
    for (int j = 0; j < 20; ++j) {
      if (j == i) continue;
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        ab += vecs[i][d] * vecs[j][d];
        aa += vecs[i][d] * vecs[i][d];
        bb += vecs[j][d] * vecs[j][d];
      }
      cand.push_back({-ab / std::sqrt(aa * bb), fmt::format("s{:02d}", j)});
    }
    std::sort(cand.begin(), cand.end());
    double hits = 0, sum = 0;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      if (genes[cand[k].second] == genes[fmt::format("s{:02d}", i)]) {
        hits += 1;
        sum += hits / static_cast<double>(k + 1);
      }
    }
    CHECK(r.per_perturbation.at(fmt::format("s{:02d}", i)) == doctest::Approx(sum / hits).epsilon(1e-12));
  }
}

TEST_CASE("aggregation by id") {
  ScreenEmbeddings s;
  s.push_back("b", "x", false, std::vector<double>{1, 10});
  s.push_back("a", "x", false, std::vector<double>{0, 0});
  s.push_back("b", "y", false, std::vector<double>{3, 2});
  s.push_back("b", "z", false, std::vector<double>{8, 4});
  s.push_back("ctrl", "x", true, std::vector<double>{1, 1});
  auto mean = aggregate_by_id(s, Aggregate::mean, true);
  CHECK(mean.ids == std::vector<std::string>{"a", "b"});
  CHECK(mean.row(1)[0] == doctest::Approx(4.0));
  auto med = aggregate_by_id(s, Aggregate::median, false);
  CHECK(med.ids.size() == 3);
  CHECK(med.row(1)[0] == 3.0);
  CHECK(med.row(1)[1] == 4.0);
}

TEST_CASE("gene-gene recall examples") {
  // Related pairs at similarity 1, unrelated at 0.
  EmbeddingTable t;
  const std::size_t n = 12;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(n, 0.0);
    v[i / 2] = 1.0;  // pairs (0,1), (2,3), ... are identical
    v[6 + i / 2] = (i % 2) ? 1e-9 : 0.0;
    t.push_back(fmt::format("g{:02d}", i), v);
  }
  // 66 pairs, tail at f=0.5 holds 16 pairs; relations: 6 identical pairs.
  std::vector<IdPair> rel;
  for (std::size_t i = 0; i < n; i += 2) rel.push_back({fmt::format("g{:02d}", i), fmt::format("g{:02d}", i + 1)});
  auto r = gene_gene_recall(t, rel, 0.5);
  CHECK(r.recall == 1.0);
  CHECK(r.pairs == 66);
  CHECK(r.tail == 16);
  CHECK_THROWS_AS(gene_gene_recall(t, rel, 0.0), Error);
  CHECK_THROWS_AS(gene_gene_recall(t, {{"x", "y"}}, 0.1), Error);
}

TEST_CASE("gene-gene recall on six hand-set perturbations matches pair enumeration") {
  // Angles on a circle give hand-set cosines.
  EmbeddingTable t;
  const double angles[6] = {0.0, 0.3, 1.4, 2.0, 2.9, 3.1};
  for (int i = 0; i < 6; ++i) t.push_back(fmt::format("p{}", i), std::vector<double>{std::cos(angles[i]), std::sin(angles[i])});
  std::vector<IdPair> rel{{"p0", "p1"}, {"p5", "p0"}, {"p2", "p3"}};
  for (double f : {0.14, 0.2, 0.27, 0.4, 0.5}) {
    std::vector<std::tuple<double, int, int>> pairs;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) pairs.push_back({-std::cos(angles[i] - angles[j]), i, j});
    std::sort(pairs.begin(), pairs.end());
    const int k = static_cast<int>(std::floor(15 * f / 2 + 1e-9));
    auto known = [](int a, int b) { return (a == 0 && b == 1) || (a == 0 && b == 5) || (a == 2 && b == 3); };
    int got = 0;
    for (int i = 0; i < k; ++i) {
      got += known(std::get<1>(pairs[i]), std::get<2>(pairs[i]));
      got += known(std::get<1>(pairs[14 - i]), std::get<2>(pairs[14 - i]));
    }
    auto r = gene_gene_recall(t, rel, f);
    CHECK(r.tail == static_cast<std::size_t>(k));
    CHECK(r.recall == static_cast<double>(got) / 3.0);
  }
}

TEST_CASE("random embeddings give gene-gene recall near the tail fraction") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EmbeddingTable t;
    for (int i = 0; i < 100; ++i) t.push_back(fmt::format("p{:02d}", i), gaussian(rng, 16));
    std::vector<IdPair> rel;
    for (int i = 0; i < 100; ++i)
      for (int j = i + 1; j < 100; ++j)
        if (rng.uniform() < 0.3) rel.push_back({fmt::format("p{:02d}", i), fmt::format("p{:02d}", j)});
    const double r = gene_gene_recall(t, rel, 0.10).recall;
    CHECK(r >= 0.07);
    CHECK(r <= 0.13);
  }
}

TEST_CASE("shuffled labels keep controls and permute treated ids") {
  ScreenEmbeddings s;
  for (int i = 0; i < 6; ++i) s.push_back(fmt::format("p{}", i), "b", false, std::vector<double>{1.0 * i, 1});
  s.push_back("ctrl", "b", true, std::vector<double>{0, 1});
  auto out = shuffle_labels(s, 4);
  CHECK(out.table.ids.back() == "ctrl");
  auto a = out.table.ids, b = s.table.ids;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(out.table.values == s.table.values);
}

}  // TEST_SUITE
