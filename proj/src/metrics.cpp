#include "unier/metrics.hpp"

#include <algorithm>
#include <string>

#include "unier/error.hpp"

namespace unier {

LearningPath unify_output(const RecommendationSet& s, std::size_t budget) {
  if (s.size() < budget) {
    throw InvalidArgument("recommendation set of size " +
                          std::to_string(s.size()) + " is smaller than budget " +
                          std::to_string(budget));
  }
  std::vector<ScoredExercise> ranked(s.entries().begin(), s.entries().end());
  std::sort(ranked.begin(), ranked.end(),
            [](const ScoredExercise& a, const ScoredExercise& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.exercise < b.exercise;
            });
  LearningPath path;
  path.steps.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) path.steps.push_back(ranked[i].exercise);
  return path;
}

WeightVector build_tga_weights(std::span<const ConceptId> targets,
                               std::size_t num_concepts) {
  std::vector<ConceptId> unique(targets.begin(), targets.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.empty()) throw InvalidArgument("TGA needs at least one target");
  std::vector<double> w(num_concepts, 0.0);
  for (ConceptId c : unique) {
    if (c >= num_concepts) {
      throw InvalidArgument("TGA target " + std::to_string(c) + " out of range");
    }
    w[c] = 1.0 / static_cast<double>(unique.size());
  }
  return WeightVector(std::move(w));
}

std::vector<ConceptId> unmastered_concepts(const MasteryVector& m,
                                           double threshold) {
  std::vector<ConceptId> out;
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (m[c] < threshold) out.push_back(static_cast<ConceptId>(c));
  }
  return out;
}

WeightVector build_gpp_weights(const MasteryVector& m, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("GPP threshold must lie in (0, 1)");
  }
  const auto unmastered = unmastered_concepts(m, threshold);
  if (unmastered.empty()) return WeightVector::zeros(m.size());
  std::vector<double> w(m.size(), 0.0);
  for (ConceptId c : unmastered) {
    w[c] = 1.0 / static_cast<double>(unmastered.size());
  }
  return WeightVector(std::move(w));
}

WeightVector build_weights(const TaskSpec& task, const MasteryVector& m,
                           std::size_t num_concepts) {
  if (const auto* tga = std::get_if<TgaTask>(&task)) {
    return build_tga_weights(tga->targets, num_concepts);
  }
  return build_gpp_weights(m, std::get<GppTask>(task).threshold);
}

double weighted_gain(const WeightVector& w, const MasteryVector& before,
                     const MasteryVector& after) {
  if (w.size() != before.size() || w.size() != after.size()) {
    throw InvalidArgument("weight and mastery dimensions differ");
  }
  double gain = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c] != 0.0) gain += w[c] * (after[c] - before[c]);
  }
  return gain;
}

double wcg(const Estimator& est, const History& h, const LearningPath& path,
           const WeightVector& w, const SimMode& mode) {
  if (w.size() != est.num_concepts()) {
    throw InvalidArgument("weight vector dimension does not match estimator");
  }
  const MasteryVector before = est.estimate(h);
  if (path.empty()) return 0.0;
  const MasteryVector after = simulate_from(est, before, path, mode).final_mastery;
  return w.all_zero() ? 0.0 : weighted_gain(w, before, after);
}

double wcg_at_k(const Estimator& est, const History& h,
                const LearningPath& path, const WeightVector& w, std::size_t k,
                const SimMode& mode) {
  return wcg(est, h, path.prefix(k), w, mode);
}

}  // namespace unier
