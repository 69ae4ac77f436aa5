#include "eval/biology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "util/error.hpp"
#include "util/hash.hpp"
#include "util/parallel.hpp"
#include "util/rng.hpp"

namespace cellclip::eval {

namespace {

struct QueryPlan {
  QueryAp result;
  std::size_t row = 0;
  std::vector<std::size_t> candidates;
  std::vector<bool> relevant;
};

void score_queries(std::vector<QueryPlan>& plans, const EmbeddingTable& table, const MapOptions& opt) {
  parallel_for(plans.size(), [&](std::size_t q) {
    auto& plan = plans[q];
    std::vector<std::string> ids;
    std::vector<double> sims;
    for (std::size_t c : plan.candidates) {
      ids.push_back(table.ids[c]);
      sims.push_back(cosine(table.row(plan.row), table.row(c)));
    }
    const auto ranked = rank_candidates(ids, sims, plan.relevant);
    plan.result.ap = average_precision(ranked);
    plan.result.relevant = ranked.relevant_count();
    plan.result.candidates = ranked.size();
    const auto key = fnv1a(plan.result.id + "/" + plan.result.batch);
    plan.result.pvalue = permutation_pvalue(ranked.relevant, opt.permutations, opt.seed, key);
  });
}

MapReport summarize(std::vector<QueryPlan>& plans, const MapOptions& opt,
                    const std::map<std::string, std::string>& classes) {
  MapReport r;
  std::vector<double> p;
  for (const auto& plan : plans) p.push_back(plan.result.pvalue);
  const auto reject = benjamini_hochberg(p, opt.alpha);
  std::map<std::string, std::pair<double, std::size_t>> all, kept;
  std::size_t n_kept = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    auto q = plans[i].result;
    q.significant = reject[i];
    auto& a = all[q.id];
    a.first += q.ap;
    ++a.second;
    if (q.significant) {
      auto& k = kept[q.id];
      k.first += q.ap;
      ++k.second;
      ++n_kept;
    }
    r.queries.push_back(std::move(q));
  }
  auto mean_of = [&](const std::map<std::string, std::pair<double, std::size_t>>& m,
                     std::map<std::string, double>& per_class, std::map<std::string, double>* per_id) {
    double total = 0.0;
    std::map<std::string, std::pair<double, std::size_t>> cls;
    for (const auto& [id, v] : m) {
      const double ap = v.first / static_cast<double>(v.second);
      if (per_id) (*per_id)[id] = ap;
      total += ap;
      if (auto it = classes.find(id); it != classes.end()) {
        cls[it->second].first += ap;
        ++cls[it->second].second;
      }
    }
    for (const auto& [c, v] : cls) per_class[c] = v.first / static_cast<double>(v.second);
    return m.empty() ? 0.0 : total / static_cast<double>(m.size());
  };
  r.map = mean_of(all, r.per_class, &r.per_perturbation);
  r.map_filtered = mean_of(kept, r.per_class_filtered, nullptr);
  r.retained_fraction = plans.empty() ? 0.0 : static_cast<double>(n_kept) / static_cast<double>(plans.size());
  return r;
}

}  // namespace

MapReport replicate_detection_map(const ScreenEmbeddings& screen, const MapOptions& options,
                                  const std::map<std::string, std::string>& classes) {
  std::vector<std::size_t> controls;
  for (std::size_t i = 0; i < screen.size(); ++i)
    if (screen.control[i]) controls.push_back(i);
  if (controls.empty()) fail(Errc::validation, "replicate detection needs control embeddings");

  std::vector<QueryPlan> plans;
  std::set<std::string> skipped;
  for (std::size_t i = 0; i < screen.size(); ++i) {
    if (screen.control[i]) continue;
    QueryPlan plan;
    plan.row = i;
    plan.result.id = screen.table.ids[i];
    plan.result.batch = screen.batch[i];
    for (std::size_t j = 0; j < screen.size(); ++j) {
      if (j == i || screen.control[j]) continue;
      if (screen.table.ids[j] == screen.table.ids[i] && screen.batch[j] != screen.batch[i]) {
        plan.candidates.push_back(j);
        plan.relevant.push_back(true);
      }
    }
    if (plan.candidates.empty()) {
      skipped.insert(plan.result.id);
      continue;
    }
    for (std::size_t c : controls) {
      plan.candidates.push_back(c);
      plan.relevant.push_back(false);
    }
    plans.push_back(std::move(plan));
  }
  score_queries(plans, screen.table, options);
  auto report = summarize(plans, options, classes);
  report.skipped.assign(skipped.begin(), skipped.end());
  return report;
}

EmbeddingTable aggregate_by_id(const ScreenEmbeddings& screen, Aggregate how, bool treated_only) {
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < screen.size(); ++i) {
    if (treated_only && screen.control[i]) continue;
    rows[screen.table.ids[i]].push_back(i);
  }
  EmbeddingTable out;
  out.dim = screen.table.dim;
  std::vector<double> v(out.dim), col;
  for (const auto& [id, members] : rows) {
    for (std::size_t j = 0; j < out.dim; ++j) {
      col.clear();
      for (std::size_t r : members) col.push_back(screen.table.values[r * out.dim + j]);
      if (how == Aggregate::mean) {
        v[j] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
      } else {
        std::sort(col.begin(), col.end());
        const std::size_t n = col.size();
        v[j] = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
      }
    }
    out.push_back(id, v);
  }
  return out;
}

MapReport sister_matching_map(const ScreenEmbeddings& screen,
                              const std::map<std::string, std::set<std::string>>& genes,
                              const std::map<std::string, std::string>& classes, SisterMode mode,
                              const MapOptions& options) {
  const auto table = aggregate_by_id(screen, Aggregate::mean, true);
  for (const auto& id : table.ids) {
    if (!genes.count(id)) fail(Errc::validation, "perturbation '{}' has no gene annotation", id);
    if (!classes.count(id)) fail(Errc::validation, "perturbation '{}' has no class label", id);
  }
  auto shares_gene = [&](const std::string& a, const std::string& b) {
    const auto& ga = genes.at(a);
    const auto& gb = genes.at(b);
    return std::any_of(ga.begin(), ga.end(), [&](const std::string& g) { return gb.count(g) > 0; });
  };
  std::vector<QueryPlan> plans;
  MapReport skipped;
  for (std::size_t i = 0; i < table.size(); ++i) {
    QueryPlan plan;
    plan.row = i;
    plan.result.id = table.ids[i];
    const auto& cls = classes.at(table.ids[i]);
    for (std::size_t j = 0; j < table.size(); ++j) {
      if (j == i) continue;
      const bool same_class = classes.at(table.ids[j]) == cls;
      if (same_class != (mode == SisterMode::within)) continue;
      plan.candidates.push_back(j);
      plan.relevant.push_back(shares_gene(table.ids[i], table.ids[j]));
    }
    if (std::none_of(plan.relevant.begin(), plan.relevant.end(), [](bool b) { return b; })) {
      skipped.skipped.push_back(plan.result.id);
      continue;
    }
    plans.push_back(std::move(plan));
  }
  score_queries(plans, table, options);
  auto report = summarize(plans, options, classes);
  report.skipped = std::move(skipped.skipped);
  return report;
}

RelationRecall gene_gene_recall(const EmbeddingTable& table, const std::vector<IdPair>& relations,
                                double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 0.5)) {
    fail(Errc::invalid_argument, "tail fraction must lie in (0, 0.5], got {}", tail_fraction);
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < table.size(); ++i) index.emplace(table.ids[i], i);
  std::set<std::pair<std::size_t, std::size_t>> known;
  for (const auto& [a, b] : relations) {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end() || a == b) continue;
    known.insert(std::minmax(ia->second, ib->second));
  }
  if (known.empty()) fail(Errc::validation, "no relations among the scored perturbations");

  struct Pair {
    double sim;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  const std::size_t n = table.size();
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({cosine(table.row(i), table.row(j)), i, j});
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& x, const Pair& y) {
    if (x.sim != y.sim) return x.sim > y.sim;
    const auto kx = std::minmax(table.ids[x.a], table.ids[x.b]);
    const auto ky = std::minmax(table.ids[y.a], table.ids[y.b]);
    return kx < ky;
  });

  RelationRecall r;
  r.pairs = pairs.size();
  r.known = known.size();
  r.tail = static_cast<std::size_t>(std::floor(static_cast<double>(r.pairs) * tail_fraction / 2.0 + 1e-9));
  auto hit = [&](const Pair& p) { return known.count(std::minmax(p.a, p.b)) > 0; };
  for (std::size_t i = 0; i < r.tail; ++i) {
    if (hit(pairs[i])) ++r.recovered;
    if (hit(pairs[r.pairs - 1 - i])) ++r.recovered;
  }
  r.recall = static_cast<double>(r.recovered) / static_cast<double>(r.known);
  return r;
}

ScreenEmbeddings shuffle_labels(const ScreenEmbeddings& screen, std::uint64_t seed) {
  std::vector<std::size_t> treated;
  for (std::size_t i = 0; i < screen.size(); ++i)
    if (!screen.control[i]) treated.push_back(i);
  std::vector<std::string> labels;
  for (std::size_t i : treated) labels.push_back(screen.table.ids[i]);
  auto rng = Rng::keyed({seed, fnv1a("shuffle_labels")});
  rng.shuffle(labels.begin(), labels.end());
  auto out = screen;
  for (std::size_t k = 0; k < treated.size(); ++k) out.table.ids[treated[k]] = labels[k];
  return out;
}

}  // namespace cellclip::eval
