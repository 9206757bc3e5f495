#pragma once

// Item-level recommenders: top-k by knowledge gap, and a two-stage variant
// that re-ranks a gap-ranked candidate pool for concept coverage.

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include "unier/core.hpp"

namespace unier {

struct IlerConfig {
  std::size_t k = 10;
  std::size_t pool_size = 20;

  // Throws InvalidArgument unless 1 <= k < pool_size <= num_exercises.
  void validate(std::size_t num_exercises) const;
};

// score_e = sum over concepts_of(e) of (1 - m_c), i.e. Q (1 - m).
std::vector<double> gap_scores(const QMatrix& q, const MasteryVector& m);

// Exercise ids ordered by descending gap score, ties by ascending id, with
// `excluded` ids removed.
std::vector<ExerciseId> rank_by_gap(std::span<const double> gaps,
                                    std::span<const ExerciseId> excluded = {});

RecommendationSet greedy_topk(const QMatrix& q, const MasteryVector& m,
                              std::size_t k,
                              std::span<const ExerciseId> excluded = {});

// Compared lexicographically: coverage first, then summed gap score.
struct DiversityValue {
  std::size_t coverage = 0;
  double tiebreak = 0.0;

  friend auto operator<=>(const DiversityValue&, const DiversityValue&) = default;
};

DiversityValue diversity_value(std::span<const ExerciseId> subset,
                               const QMatrix& q, std::span<const double> gaps);

// Greedy max-coverage over the top pool_size candidates. Attached scores are
// gap scores.
RecommendationSet rerank_diverse(const QMatrix& q, const MasteryVector& m,
                                 const IlerConfig& cfg,
                                 std::span<const ExerciseId> excluded = {});

inline constexpr std::size_t kExactPoolLimit = 20;
inline constexpr std::size_t kExactKLimit = 6;

// Exhaustive arg-max of diversity_value over all k-subsets of the pool.
RecommendationSet exact_rerank(const QMatrix& q, const MasteryVector& m,
                               const IlerConfig& cfg,
                               std::span<const ExerciseId> excluded = {});

}  // namespace unier
