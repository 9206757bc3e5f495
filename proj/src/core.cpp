#include "unier/core.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "unier/error.hpp"

namespace unier {

QMatrix QMatrix::build(std::span<const IncidencePair> pairs,
                       std::size_t num_exercises, std::size_t num_concepts) {
  QMatrix q;
  q.rows_.resize(num_exercises);
  q.cols_.resize(num_concepts);
  for (const auto& [e, c] : pairs) {
    if (e >= num_exercises || c >= num_concepts) {
      throw InvalidArgument("q-matrix pair (" + std::to_string(e) + ", " +
                            std::to_string(c) + ") out of range");
    }
    q.rows_[e].push_back(c);
  }
  for (std::size_t e = 0; e < num_exercises; ++e) {
    auto& row = q.rows_[e];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (row.empty()) {
      throw InvalidArgument("exercise " + std::to_string(e) +
                            " covers no concept");
    }
    for (ConceptId c : row) q.cols_[c].push_back(static_cast<ExerciseId>(e));
  }
  return q;
}

std::span<const ConceptId> QMatrix::concepts_of(ExerciseId e) const {
  if (e >= rows_.size()) {
    throw InvalidArgument("exercise id " + std::to_string(e) +
                          " out of range");
  }
  return rows_[e];
}

std::span<const ExerciseId> QMatrix::exercises_of(ConceptId c) const {
  if (c >= cols_.size()) {
    throw InvalidArgument("concept id " + std::to_string(c) + " out of range");
  }
  return cols_[c];
}

bool QMatrix::contains(ExerciseId e, ConceptId c) const {
  const auto row = concepts_of(e);
  return std::binary_search(row.begin(), row.end(), c);
}

std::vector<IncidencePair> QMatrix::pairs() const {
  std::vector<IncidencePair> out;
  for (std::size_t e = 0; e < rows_.size(); ++e) {
    for (ConceptId c : rows_[e]) {
      out.emplace_back(static_cast<ExerciseId>(e), c);
    }
  }
  return out;
}

void History::append(ExerciseId e, bool correct) {
  const std::uint32_t step = items.empty() ? 0 : items.back().step + 1;
  items.push_back({e, correct, step});
}

void validate_history(const History& h, std::size_t num_exercises) {
  for (std::size_t i = 0; i < h.items.size(); ++i) {
    const auto& it = h.items[i];
    if (it.exercise >= num_exercises) {
      throw InvalidArgument("history of student " + std::to_string(h.student) +
                            " references exercise " +
                            std::to_string(it.exercise) + " out of range");
    }
    if (i > 0 && it.step <= h.items[i - 1].step) {
      throw InvalidArgument("history of student " + std::to_string(h.student) +
                            " has non-increasing steps at position " +
                            std::to_string(i));
    }
  }
}

MasteryVector::MasteryVector(std::vector<double> values)
    : values_(std::move(values)) {
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("mastery value outside [0, 1]");
    }
  }
}

MasteryVector MasteryVector::filled(std::size_t n, double value) {
  return MasteryVector(std::vector<double>(n, value));
}

WeightVector::WeightVector(std::vector<double> weights)
    : weights_(std::move(weights)) {
  double sum = 0.0;
  bool zero = true;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("weights must be finite and non-negative");
    }
    if (w != 0.0) zero = false;
    sum += w;
  }
  if (!zero && std::abs(sum - 1.0) > 1e-9) {
    throw InvalidArgument("weights must be all zero or sum to 1");
  }
}

WeightVector WeightVector::zeros(std::size_t n) {
  return WeightVector(std::vector<double>(n, 0.0));
}

bool WeightVector::all_zero() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [](double w) { return w == 0.0; });
}

RecommendationSet::RecommendationSet(std::vector<ScoredExercise> entries)
    : entries_(std::move(entries)) {
  std::vector<ExerciseId> seen = ids();
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw InvalidArgument("recommendation set contains duplicate exercises");
  }
  for (const auto& s : entries_) {
    if (!std::isfinite(s.score)) {
      throw InvalidArgument("recommendation score is not finite");
    }
  }
}

bool RecommendationSet::contains(ExerciseId e) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [e](const ScoredExercise& s) { return s.exercise == e; });
}

std::vector<ExerciseId> RecommendationSet::ids() const {
  std::vector<ExerciseId> out;
  out.reserve(entries_.size());
  for (const auto& s : entries_) out.push_back(s.exercise);
  std::sort(out.begin(), out.end());
  return out;
}

LearningPath LearningPath::prefix(std::size_t k) const {
  if (k > steps.size()) {
    throw InvalidArgument("prefix length " + std::to_string(k) +
                          " exceeds path length " +
                          std::to_string(steps.size()));
  }
  return LearningPath{{steps.begin(), steps.begin() + static_cast<long>(k)}};
}

PrerequisiteGraph::PrerequisiteGraph(
    std::size_t num_concepts,
    std::vector<std::pair<ConceptId, ConceptId>> edges)
    : edges_(std::move(edges)),
      prereqs_(num_concepts),
      dependents_(num_concepts) {
  for (const auto& [p, d] : edges_) {
    if (p >= num_concepts || d >= num_concepts) {
      throw InvalidArgument("prerequisite edge (" + std::to_string(p) + ", " +
                            std::to_string(d) + ") out of range");
    }
    prereqs_[d].push_back(p);
    dependents_[p].push_back(d);
  }
  for (auto& v : prereqs_) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
      throw InvalidArgument("duplicate prerequisite edge");
    }
  }
  for (auto& v : dependents_) std::sort(v.begin(), v.end());
  if (topological_order().size() != num_concepts) {
    throw InvalidArgument("prerequisite graph contains a cycle");
  }
}

PrerequisiteGraph PrerequisiteGraph::flat(std::size_t num_concepts) {
  return PrerequisiteGraph(num_concepts, {});
}

PrerequisiteGraph PrerequisiteGraph::chain(std::size_t num_concepts,
                                           std::size_t depth) {
  if (depth > num_concepts) {
    throw InvalidArgument("chain depth exceeds number of concepts");
  }
  std::vector<std::pair<ConceptId, ConceptId>> edges;
  for (std::size_t c = 1; c < depth; ++c) {
    edges.emplace_back(static_cast<ConceptId>(c - 1),
                       static_cast<ConceptId>(c));
  }
  return PrerequisiteGraph(num_concepts, std::move(edges));
}

std::span<const ConceptId> PrerequisiteGraph::prereqs_of(ConceptId c) const {
  if (c >= prereqs_.size()) {
    throw InvalidArgument("concept id " + std::to_string(c) + " out of range");
  }
  return prereqs_[c];
}

std::span<const ConceptId> PrerequisiteGraph::dependents_of(
    ConceptId c) const {
  if (c >= dependents_.size()) {
    throw InvalidArgument("concept id " + std::to_string(c) + " out of range");
  }
  return dependents_[c];
}

std::vector<ConceptId> PrerequisiteGraph::topological_order() const {
  const std::size_t n = prereqs_.size();
  std::vector<std::size_t> indegree(n);
  for (std::size_t c = 0; c < n; ++c) indegree[c] = prereqs_[c].size();
  std::priority_queue<ConceptId, std::vector<ConceptId>, std::greater<>> ready;
  for (std::size_t c = 0; c < n; ++c) {
    if (indegree[c] == 0) ready.push(static_cast<ConceptId>(c));
  }
  std::vector<ConceptId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const ConceptId c = ready.top();
    ready.pop();
    order.push_back(c);
    for (ConceptId d : dependents_[c]) {
      if (--indegree[d] == 0) ready.push(d);
    }
  }
  return order;
}

}  // namespace unier
