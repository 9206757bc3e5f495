#pragma once

#include <initializer_list>
#include <vector>

#include "unier/core.hpp"
#include "unier/simulator.hpp"

namespace testing {

// Q-matrix from explicit concept rows.
inline unier::QMatrix q_from_rows(std::initializer_list<std::vector<unier::ConceptId>> rows,
                                  std::size_t nc) {
  std::vector<unier::IncidencePair> pairs;
  unier::ExerciseId e = 0;
  for (const auto& row : rows) {
    for (auto c : row) pairs.emplace_back(e, c);
    ++e;
  }
  return unier::QMatrix::build(pairs, rows.size(), nc);
}

// One concept, `ne` exercises all covering it.
inline unier::QMatrix single_concept_bank(std::size_t ne) {
  std::vector<unier::IncidencePair> pairs;
  for (unier::ExerciseId e = 0; e < ne; ++e) pairs.emplace_back(e, 0);
  return unier::QMatrix::build(pairs, ne, 1);
}

inline unier::LearningPath path(std::initializer_list<unier::ExerciseId> steps) {
  return unier::LearningPath{std::vector<unier::ExerciseId>(steps)};
}

// Five-concept chain, ten exercises e -> concept e mod 5.
inline unier::Estimator chain5_estimator() {
  std::vector<unier::IncidencePair> pairs;
  for (unier::ExerciseId e = 0; e < 10; ++e) pairs.emplace_back(e, e % 5);
  unier::BktParams p = unier::BktParams::uniform(5, 0.1, 0.3, 0.2, 0.1);
  p.p_init = {0.6, 0.3, 0.2, 0.1, 0.1};
  return unier::Estimator(unier::QMatrix::build(pairs, 10, 5), p,
                          unier::PrerequisiteGraph::chain(5, 5));
}

}  // namespace testing
