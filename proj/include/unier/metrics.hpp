#pragma once

// Unified output projection and the Weighted Cognitive Gain metric with its
// two task weightings: targeted goal achievement (TGA) and global
// proficiency promotion (GPP).

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "unier/core.hpp"
#include "unier/simulator.hpp"

namespace unier {

inline constexpr double kDefaultMasteryThreshold = 0.5;

struct TgaTask {
  std::vector<ConceptId> targets;
};
struct GppTask {
  double threshold = kDefaultMasteryThreshold;
};
using TaskSpec = std::variant<TgaTask, GppTask>;

// Orders an item-level set into a path: the `budget` highest scores,
// descending, ties by ascending exercise id.
LearningPath unify_output(const RecommendationSet& s, std::size_t budget);

WeightVector build_tga_weights(std::span<const ConceptId> targets,
                               std::size_t num_concepts);

// Uniform over concepts with mastery strictly below `threshold`; all zero
// when every concept is mastered.
WeightVector build_gpp_weights(const MasteryVector& m, double threshold);

// Concepts below `threshold`, ascending.
std::vector<ConceptId> unmastered_concepts(const MasteryVector& m,
                                           double threshold);

WeightVector build_weights(const TaskSpec& task, const MasteryVector& m,
                           std::size_t num_concepts);

// Weighted mastery difference between two states.
double weighted_gain(const WeightVector& w, const MasteryVector& before,
                     const MasteryVector& after);

double wcg(const Estimator& est, const History& h, const LearningPath& path,
           const WeightVector& w, const SimMode& mode);

// wcg on the first k steps of `path`.
double wcg_at_k(const Estimator& est, const History& h,
                const LearningPath& path, const WeightVector& w, std::size_t k,
                const SimMode& mode);

}  // namespace unier
