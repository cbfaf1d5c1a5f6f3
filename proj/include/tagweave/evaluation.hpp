#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/embeddings.hpp"
#include "tagweave/rng.hpp"
#include "tagweave/sampling.hpp"

namespace tagweave {

// One retrieval query: every candidate, best first. Ties in the similarity
// scores are broken by ascending tag index and flagged.
struct RankedQuery {
  std::string query;
  std::vector<std::string> ranked;
  std::vector<std::string> relevant;
  bool had_ties = false;
};

// Ranks `candidates` (given in tag-index order) by descending score.
inline RankedQuery make_ranked_query(std::string query,
                                     std::span<const std::string> candidates,
                                     std::span<const double> scores,
                                     std::vector<std::string> relevant) {
  if (candidates.size() != scores.size())
    fail(errc::shape, "candidate and score counts differ");
  if (relevant.empty())
    fail(errc::param, "query " + query + " has empty ground truth");

  std::vector<index_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<index_t>(i);
  std::sort(order.begin(), order.end(), [&scores](index_t a, index_t b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });

  RankedQuery q;
  q.query = std::move(query);
  q.relevant = std::move(relevant);
  q.ranked.reserve(candidates.size());
  for (index_t i : order) q.ranked.push_back(candidates[static_cast<std::size_t>(i)]);
  for (std::size_t i = 1; i < order.size(); ++i)
    if (scores[static_cast<std::size_t>(order[i - 1])] ==
        scores[static_cast<std::size_t>(order[i])])
      q.had_ties = true;
  return q;
}

// 1-based rank of the first relevant candidate, 0 if none is ranked.
inline index_t first_hit_rank(const RankedQuery& q) {
  const std::unordered_set<std::string> relevant(q.relevant.begin(), q.relevant.end());
  for (std::size_t i = 0; i < q.ranked.size(); ++i)
    if (relevant.count(q.ranked[i])) return static_cast<index_t>(i) + 1;
  return 0;
}

// Fraction of queries with at least one relevant candidate in the top k.
inline double hit_rate_at_k(std::span<const RankedQuery> queries, int k) {
  if (k < 1) fail(errc::param, "k must be at least 1");
  if (queries.empty()) fail(errc::empty_dataset, "no queries to evaluate");
  std::int64_t hits = 0;
  for (const auto& q : queries) {
    const index_t rank = first_hit_rank(q);
    if (rank >= 1 && rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

// Average precision: mean over relevant items of the precision at each
// relevant item's rank.
inline double average_precision(const RankedQuery& q) {
  const std::unordered_set<std::string> relevant(q.relevant.begin(), q.relevant.end());
  double sum = 0.0;
  std::int64_t found = 0;
  for (std::size_t i = 0; i < q.ranked.size(); ++i) {
    if (!relevant.count(q.ranked[i])) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  if (found == 0) return 0.0;
  return sum / static_cast<double>(found);
}

inline double mean_average_precision(std::span<const RankedQuery> queries,
                                     WarningList* warnings = nullptr) {
  if (queries.empty()) fail(errc::empty_dataset, "no queries to evaluate");
  double sum = 0.0;
  std::int64_t used = 0;
  for (const auto& q : queries) {
    if (q.relevant.empty()) {
      warn(warnings, "query " + q.query + " has no ground truth; skipped");
      continue;
    }
    sum += average_precision(q);
    ++used;
  }
  if (used == 0) fail(errc::empty_dataset, "every query had empty ground truth");
  return sum / static_cast<double>(used);
}

// Percentile bootstrap over per-query values: half the span between the
// (1-level)/2 and (1+level)/2 quantiles of the resampled means.
inline double bootstrap_ci(std::span<const double> values, double level = 0.95,
                           int resamples = 10000, std::uint64_t seed = 0) {
  if (values.size() < 2)
    fail(errc::undefined_ci, "need at least 2 values for a confidence interval");
  if (!(level > 0.0 && level < 1.0)) fail(errc::param, "level must lie in (0, 1)");
  if (resamples < 1) fail(errc::param, "resamples must be positive");

  const std::size_t n = values.size();
  std::vector<double> means(static_cast<std::size_t>(resamples));
  // Per-resample generators derived from (seed, r): resamples are
  // independent of iteration order.
  for (int r = 0; r < resamples; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += values[static_cast<std::size_t>(rng.uniform_int(n))];
    means[static_cast<std::size_t>(r)] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto quantile = [&means](double p) {
    const double pos = p * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  const double alpha = (1.0 - level) / 2.0;
  return (quantile(1.0 - alpha) - quantile(alpha)) / 2.0;
}

struct EvalOptions {
  std::vector<int> hr_ks{1, 2};
  double ci_level = 0.95;
  int ci_resamples = 10000;
  std::uint64_t seed = 0;
  std::string embedding_kind;
};

struct RankedEvaluation {
  std::string task;
  std::string embedding_kind;
  std::vector<RankedQuery> queries;
  std::map<int, double> hr;
  double map = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> ci95;
  WarningList warnings;
};

// Metrics plus bootstrap CIs for a finished query set.
inline RankedEvaluation evaluate_queries(std::string task,
                                         std::vector<RankedQuery> queries,
                                         const EvalOptions& opts) {
  RankedEvaluation eval;
  eval.task = std::move(task);
  eval.embedding_kind = opts.embedding_kind;
  eval.queries = std::move(queries);
  if (eval.queries.empty()) return eval;

  std::vector<double> ap_values;
  ap_values.reserve(eval.queries.size());
  for (const auto& q : eval.queries) ap_values.push_back(average_precision(q));

  for (int k : opts.hr_ks) eval.hr[k] = hit_rate_at_k(eval.queries, k);
  eval.map = mean_average_precision(eval.queries, &eval.warnings);

  if (eval.queries.size() >= 2) {
    std::uint64_t stream = 0;
    for (int k : opts.hr_ks) {
      std::vector<double> hits;
      hits.reserve(eval.queries.size());
      for (const auto& q : eval.queries) {
        const index_t rank = first_hit_rank(q);
        hits.push_back(rank >= 1 && rank <= k ? 1.0 : 0.0);
      }
      eval.ci95["hr@" + std::to_string(k)] =
          bootstrap_ci(hits, opts.ci_level, opts.ci_resamples,
                       mix_seed(opts.seed, stream++));
    }
    eval.ci95["map"] = bootstrap_ci(ap_values, opts.ci_level, opts.ci_resamples,
                                    mix_seed(opts.seed, stream++));
  } else {
    warn(&eval.warnings, "fewer than 2 queries; confidence intervals omitted");
  }
  return eval;
}

// Taxonomy inference: one query per tag that appears as a child in the edge
// list; candidates are the parent-level tags, relevant = the tag's parents.
// A child with several parents counts as a hit on any of them.
inline RankedEvaluation eval_taxonomy(const SimilarityMatrix& sim,
                                      std::span<const TaxonomyEdge> edges,
                                      const EvalOptions& opts = {}) {
  WarningList warnings;

  std::vector<std::string> parents;  // in column order
  {
    std::unordered_set<std::string> parent_names;
    for (const auto& e : edges) parent_names.insert(e.parent);
    for (const auto& tag : sim.col_tags)
      if (parent_names.count(tag)) parents.push_back(tag);
    for (const auto& name : parent_names)
      if (std::find(sim.col_tags.begin(), sim.col_tags.end(), name) ==
          sim.col_tags.end())
        warn(&warnings, "parent tag missing from similarity columns: " + name);
  }
  if (parents.empty())
    fail(errc::empty_dataset, "no taxonomy parent is present in the similarity columns");

  std::unordered_map<std::string, std::vector<std::string>> parents_of;
  for (const auto& e : edges) parents_of[e.child].push_back(e.parent);

  std::vector<index_t> parent_cols;
  parent_cols.reserve(parents.size());
  for (const auto& p : parents) parent_cols.push_back(sim.col_of(p));

  std::vector<RankedQuery> queries;
  for (std::size_t row = 0; row < sim.row_tags.size(); ++row) {
    const auto& child = sim.row_tags[row];
    const auto it = parents_of.find(child);
    if (it == parents_of.end()) continue;

    std::vector<std::string> relevant;
    for (const auto& p : it->second)
      if (std::find(parents.begin(), parents.end(), p) != parents.end())
        relevant.push_back(p);
    if (relevant.empty()) {
      warn(&warnings, "child " + child + " has no parent among the candidates; excluded");
      continue;
    }
    std::sort(relevant.begin(), relevant.end());
    relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());

    std::vector<double> scores;
    scores.reserve(parents.size());
    for (index_t col : parent_cols)
      scores.push_back(sim.values(static_cast<Eigen::Index>(row), col));
    queries.push_back(make_ranked_query(child, parents, scores, std::move(relevant)));
  }
  for (const auto& e : edges)
    if (std::find(sim.row_tags.begin(), sim.row_tags.end(), e.child) ==
        sim.row_tags.end())
      warn(&warnings, "child tag missing from similarity rows: " + e.child);

  RankedEvaluation eval = evaluate_queries("taxonomy", std::move(queries), opts);
  eval.warnings.insert(eval.warnings.end(), warnings.begin(), warnings.end());
  return eval;
}

// Duplicate retrieval over a self-similarity of the rewritten tag system.
// Each subtag queries for its counterpart among all other tags; both
// directions of every pair are evaluated.
inline RankedEvaluation eval_dedup(const SimilarityMatrix& sim,
                                   const DuplicationPlan& plan,
                                   const EvalOptions& opts = {}) {
  WarningList warnings;
  std::vector<RankedQuery> queries;

  const auto add_query = [&](const std::string& from, const std::string& to) {
    if (std::find(sim.row_tags.begin(), sim.row_tags.end(), from) ==
            sim.row_tags.end() ||
        std::find(sim.col_tags.begin(), sim.col_tags.end(), to) ==
            sim.col_tags.end()) {
      warn(&warnings, "pair " + from + "/" + to + " not covered by the similarity matrix");
      return;
    }
    const index_t row = sim.row_of(from);
    std::vector<std::string> candidates;
    std::vector<double> scores;
    candidates.reserve(sim.col_tags.size());
    for (std::size_t j = 0; j < sim.col_tags.size(); ++j) {
      if (sim.col_tags[j] == from) continue;  // the tag itself is excluded
      candidates.push_back(sim.col_tags[j]);
      scores.push_back(sim.values(static_cast<Eigen::Index>(row),
                                  static_cast<Eigen::Index>(j)));
    }
    queries.push_back(make_ranked_query(from, candidates, scores, {to}));
  };

  for (const auto& [t1, t2] : plan.pairs) {
    add_query(t1, t2);
    add_query(t2, t1);
  }
  RankedEvaluation eval = evaluate_queries("dedup", std::move(queries), opts);
  eval.warnings.insert(eval.warnings.end(), warnings.begin(), warnings.end());
  return eval;
}

struct TranslationPair {
  std::string row_tag;
  std::string col_tag;
  double similarity = 0.0;
};

struct TranslationResult {
  RankedEvaluation eval;
  std::vector<TranslationPair> top_unmatched;
};

// Cross-system translation: each source tag with ground truth queries the
// full target vocabulary. Also reports the most similar pairs outside the
// ground truth, the interesting discoveries.
inline TranslationResult eval_translation(
    const SimilarityMatrix& sim,
    std::span<const std::pair<std::string, std::string>> ground_truth,
    const EvalOptions& opts = {}, int top_n = 10) {
  WarningList warnings;

  std::unordered_map<std::string, std::vector<std::string>> targets_of;
  std::unordered_set<std::string> pair_keys;
  for (const auto& [a, b] : ground_truth) {
    targets_of[a].push_back(b);
    pair_keys.insert(a + "\t" + b);
  }

  std::vector<RankedQuery> queries;
  for (std::size_t row = 0; row < sim.row_tags.size(); ++row) {
    const auto& a = sim.row_tags[row];
    const auto it = targets_of.find(a);
    if (it == targets_of.end()) continue;
    std::vector<std::string> relevant;
    for (const auto& b : it->second) {
      if (std::find(sim.col_tags.begin(), sim.col_tags.end(), b) != sim.col_tags.end())
        relevant.push_back(b);
      else
        warn(&warnings, "ground-truth target missing from similarity columns: " + b);
    }
    if (relevant.empty()) continue;
    std::vector<double> scores;
    scores.reserve(sim.col_tags.size());
    for (std::size_t j = 0; j < sim.col_tags.size(); ++j)
      scores.push_back(sim.values(static_cast<Eigen::Index>(row),
                                  static_cast<Eigen::Index>(j)));
    queries.push_back(make_ranked_query(a, sim.col_tags, scores, std::move(relevant)));
  }
  for (const auto& [a, b] : ground_truth)
    if (std::find(sim.row_tags.begin(), sim.row_tags.end(), a) == sim.row_tags.end())
      warn(&warnings, "ground-truth source missing from similarity rows: " + a);

  TranslationResult result;
  if (queries.empty())
    warn(&warnings, "no usable ground truth; translation metrics omitted");
  result.eval = evaluate_queries("translation", std::move(queries), opts);
  result.eval.warnings.insert(result.eval.warnings.end(), warnings.begin(),
                              warnings.end());

  struct Cell {
    double value;
    index_t row, col;
  };
  std::vector<Cell> cells;
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i)
    for (Eigen::Index j = 0; j < sim.values.cols(); ++j) {
      if (pair_keys.count(sim.row_tags[static_cast<std::size_t>(i)] + "\t" +
                          sim.col_tags[static_cast<std::size_t>(j)]))
        continue;
      cells.push_back(Cell{sim.values(i, j), i, j});
    }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  const auto n = std::min<std::size_t>(cells.size(), static_cast<std::size_t>(top_n));
  for (std::size_t i = 0; i < n; ++i)
    result.top_unmatched.push_back(
        TranslationPair{sim.row_tags[static_cast<std::size_t>(cells[i].row)],
                        sim.col_tags[static_cast<std::size_t>(cells[i].col)],
                        cells[i].value});
  return result;
}

// --- reports -----------------------------------------------------------------

inline nlohmann::json report_json(const RankedEvaluation& eval) {
  nlohmann::json j;
  j["task"] = eval.task;
  j["embedding_kind"] = eval.embedding_kind;
  j["n_queries"] = eval.queries.size();
  nlohmann::json hr = nlohmann::json::object();
  for (const auto& [k, v] : eval.hr) hr[std::to_string(k)] = v;
  j["hr"] = hr;
  j["map"] = eval.map;  // NaN serializes as null when there are no queries
  nlohmann::json ci = nlohmann::json::object();
  for (const auto& [name, v] : eval.ci95) ci[name] = v;
  j["ci95"] = ci;
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& q : eval.queries) {
    nlohmann::json entry;
    entry["query"] = q.query;
    entry["relevant"] = q.relevant;
    entry["ranked"] = q.ranked;
    const index_t rank = first_hit_rank(q);
    if (rank > 0)
      entry["first_hit_rank"] = rank;
    else
      entry["first_hit_rank"] = nullptr;
    entry["ap"] = average_precision(q);
    entry["ties"] = q.had_ties;
    per_query.push_back(entry);
  }
  j["per_query"] = per_query;
  j["warnings"] = eval.warnings;
  return j;
}

inline nlohmann::json report_json(const TranslationResult& result) {
  nlohmann::json j = report_json(result.eval);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : result.top_unmatched) {
    nlohmann::json entry;
    entry["row_tag"] = p.row_tag;
    entry["col_tag"] = p.col_tag;
    entry["similarity"] = p.similarity;
    pairs.push_back(entry);
  }
  j["top_unmatched"] = pairs;
  return j;
}

}  // namespace tagweave
