#include "unier/iler.hpp"

#include <algorithm>
#include <string>

#include "unier/error.hpp"

namespace unier {

namespace {

std::vector<ExerciseId> candidate_pool(const QMatrix& q, std::span<const double> gaps,
                                       const IlerConfig& cfg,
                                       std::span<const ExerciseId> excluded,
                                       bool allow_full_pool = false) {
  if (allow_full_pool) {
    if (cfg.k < 1 || cfg.k > cfg.pool_size || cfg.pool_size > q.num_exercises()) {
      throw InvalidArgument("exact re-ranking needs 1 <= k <= pool_size <= |E|");
    }
  } else {
    cfg.validate(q.num_exercises());
  }
  auto ranked = rank_by_gap(gaps, excluded);
  if (ranked.size() < cfg.pool_size) {
    throw InvalidArgument("only " + std::to_string(ranked.size()) +
                          " candidates remain for a pool of " +
                          std::to_string(cfg.pool_size));
  }
  ranked.resize(cfg.pool_size);
  return ranked;
}

RecommendationSet with_gap_scores(std::span<const ExerciseId> ids,
                                  std::span<const double> gaps) {
  std::vector<ScoredExercise> entries;
  entries.reserve(ids.size());
  for (ExerciseId e : ids) entries.push_back({e, gaps[e]});
  return RecommendationSet(std::move(entries));
}

}  // namespace

void IlerConfig::validate(std::size_t num_exercises) const {
  if (k < 1 || k >= pool_size || pool_size > num_exercises) {
    throw InvalidArgument("ILER config needs 1 <= k < pool_size <= |E| (k=" +
                          std::to_string(k) + ", pool_size=" +
                          std::to_string(pool_size) + ", |E|=" +
                          std::to_string(num_exercises) + ")");
  }
}

std::vector<double> gap_scores(const QMatrix& q, const MasteryVector& m) {
  if (m.size() != q.num_concepts()) {
    throw InvalidArgument("mastery dimension does not match q-matrix");
  }
  std::vector<double> scores(q.num_exercises(), 0.0);
  for (std::size_t e = 0; e < scores.size(); ++e) {
    for (ConceptId c : q.concepts_of(static_cast<ExerciseId>(e))) {
      scores[e] += 1.0 - m[c];
    }
  }
  return scores;
}

std::vector<ExerciseId> rank_by_gap(std::span<const double> gaps,
                                    std::span<const ExerciseId> excluded) {
  std::vector<bool> skip(gaps.size(), false);
  for (ExerciseId e : excluded) {
    if (e < skip.size()) skip[e] = true;
  }
  std::vector<ExerciseId> ids;
  ids.reserve(gaps.size());
  for (std::size_t e = 0; e < gaps.size(); ++e) {
    if (!skip[e]) ids.push_back(static_cast<ExerciseId>(e));
  }
  std::stable_sort(ids.begin(), ids.end(), [&](ExerciseId a, ExerciseId b) {
    return gaps[a] > gaps[b];
  });
  return ids;
}

RecommendationSet greedy_topk(const QMatrix& q, const MasteryVector& m,
                              std::size_t k,
                              std::span<const ExerciseId> excluded) {
  const auto gaps = gap_scores(q, m);
  auto ranked = rank_by_gap(gaps, excluded);
  if (k > ranked.size()) {
    throw InvalidArgument("k=" + std::to_string(k) + " exceeds the " +
                          std::to_string(ranked.size()) +
                          " available exercises");
  }
  ranked.resize(k);
  return with_gap_scores(ranked, gaps);
}

DiversityValue diversity_value(std::span<const ExerciseId> subset,
                               const QMatrix& q, std::span<const double> gaps) {
  std::vector<bool> covered(q.num_concepts(), false);
  DiversityValue v;
  for (ExerciseId e : subset) {
    for (ConceptId c : q.concepts_of(e)) {
      if (!covered[c]) {
        covered[c] = true;
        ++v.coverage;
      }
    }
    if (e < gaps.size()) v.tiebreak += gaps[e];
  }
  return v;
}

RecommendationSet rerank_diverse(const QMatrix& q, const MasteryVector& m,
                                 const IlerConfig& cfg,
                                 std::span<const ExerciseId> excluded) {
  const auto gaps = gap_scores(q, m);
  std::vector<ExerciseId> pool = candidate_pool(q, gaps, cfg, excluded);
  std::vector<bool> covered(q.num_concepts(), false);
  std::vector<ExerciseId> chosen;
  chosen.reserve(cfg.k);
  while (chosen.size() < cfg.k) {
    std::size_t best = pool.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::size_t gain = 0;
      for (ConceptId c : q.concepts_of(pool[i])) gain += covered[c] ? 0 : 1;
      // Pool is gap-ranked with id tie-break, so the first maximiser wins.
      if (best == pool.size() || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    for (ConceptId c : q.concepts_of(pool[best])) covered[c] = true;
    chosen.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<long>(best));
  }
  return with_gap_scores(chosen, gaps);
}

RecommendationSet exact_rerank(const QMatrix& q, const MasteryVector& m,
                               const IlerConfig& cfg,
                               std::span<const ExerciseId> excluded) {
  if (cfg.pool_size > kExactPoolLimit || cfg.k > kExactKLimit) {
    throw InvalidArgument("exact re-ranking is bounded to pool_size <= 20 and k <= 6");
  }
  const auto gaps = gap_scores(q, m);
  const std::vector<ExerciseId> pool = candidate_pool(q, gaps, cfg, excluded, true);
  const std::size_t n = pool.size();
  const std::size_t k = cfg.k;

  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  std::vector<ExerciseId> subset(k);
  std::vector<ExerciseId> best_subset;
  DiversityValue best_value;
  bool have_best = false;
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pick[i]];
    const DiversityValue v = diversity_value(subset, q, gaps);
    if (!have_best || v > best_value) {
      best_value = v;
      best_subset = subset;
      have_best = true;
    }
    // Next combination in lexicographic order of pool positions.
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return with_gap_scores(best_subset, gaps);
}

}  // namespace unier
