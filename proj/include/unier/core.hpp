#pragma once

// Domain types shared by every module: dense ids, the Q-matrix, interaction
// histories, mastery and weight vectors, recommender outputs, and the
// prerequisite graph. All of them are immutable once constructed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace unier {

using ConceptId = std::uint32_t;
using ExerciseId = std::uint32_t;
using StudentId = std::uint32_t;

using IncidencePair = std::pair<ExerciseId, ConceptId>;

// Binary exercise-to-concept incidence. Rows (exercise -> concepts) and
// columns (concept -> exercises) are kept sorted and mutually consistent.
class QMatrix {
 public:
  QMatrix() = default;

  // Duplicate pairs are collapsed. Throws InvalidArgument on out-of-range
  // ids or an exercise that covers no concept.
  static QMatrix build(std::span<const IncidencePair> pairs,
                       std::size_t num_exercises, std::size_t num_concepts);

  std::size_t num_exercises() const { return rows_.size(); }
  std::size_t num_concepts() const { return cols_.size(); }

  std::span<const ConceptId> concepts_of(ExerciseId e) const;
  std::span<const ExerciseId> exercises_of(ConceptId c) const;
  bool contains(ExerciseId e, ConceptId c) const;

  // Row-major dump of every incidence.
  std::vector<IncidencePair> pairs() const;

  friend bool operator==(const QMatrix&, const QMatrix&) = default;

 private:
  std::vector<std::vector<ConceptId>> rows_;
  std::vector<std::vector<ExerciseId>> cols_;
};

struct Interaction {
  ExerciseId exercise = 0;
  bool correct = false;
  std::uint32_t step = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct History {
  StudentId student = 0;
  std::vector<Interaction> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  // Appends an interaction one step after the last one.
  void append(ExerciseId e, bool correct);

  friend bool operator==(const History&, const History&) = default;
};

// Throws InvalidArgument if steps are not strictly increasing or an exercise
// id is not below `num_exercises`.
void validate_history(const History& h, std::size_t num_exercises);

// Per-concept mastery estimates, every entry in [0, 1].
class MasteryVector {
 public:
  MasteryVector() = default;
  explicit MasteryVector(std::vector<double> values);
  static MasteryVector filled(std::size_t n, double value);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t c) const { return values_[c]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const MasteryVector&, const MasteryVector&) = default;

 private:
  std::vector<double> values_;
};

// Non-negative per-concept weights that are either all zero or sum to one.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> weights);
  static WeightVector zeros(std::size_t n);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t c) const { return weights_[c]; }
  std::span<const double> values() const { return weights_; }
  bool all_zero() const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
};

struct ScoredExercise {
  ExerciseId exercise = 0;
  double score = 0.0;

  friend bool operator==(const ScoredExercise&, const ScoredExercise&) = default;
};

// Item-level output: exercises with scores, no order implied.
class RecommendationSet {
 public:
  RecommendationSet() = default;
  // Throws InvalidArgument on duplicate ids or non-finite scores.
  explicit RecommendationSet(std::vector<ScoredExercise> entries);

  std::size_t size() const { return entries_.size(); }
  std::span<const ScoredExercise> entries() const { return entries_; }
  bool contains(ExerciseId e) const;

  // Exercise ids in ascending order.
  std::vector<ExerciseId> ids() const;

 private:
  std::vector<ScoredExercise> entries_;
};

// Path-level output: an ordered sequence, repeats allowed.
struct LearningPath {
  std::vector<ExerciseId> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  LearningPath prefix(std::size_t k) const;

  friend bool operator==(const LearningPath&, const LearningPath&) = default;
  friend auto operator<=>(const LearningPath& a, const LearningPath& b) {
    return a.steps <=> b.steps;
  }
};

// Directed acyclic graph over concepts; an edge (p, d) means p is a
// prerequisite of d.
class PrerequisiteGraph {
 public:
  PrerequisiteGraph() = default;
  // Throws InvalidArgument on out-of-range nodes or a cycle. Duplicate and
  // self edges are rejected as well (a self edge is a cycle).
  PrerequisiteGraph(std::size_t num_concepts,
                    std::vector<std::pair<ConceptId, ConceptId>> edges);
  static PrerequisiteGraph flat(std::size_t num_concepts);
  // c0 -> c1 -> ... -> c_{depth-1}; remaining concepts have no edges.
  static PrerequisiteGraph chain(std::size_t num_concepts, std::size_t depth);

  std::size_t num_concepts() const { return prereqs_.size(); }
  std::span<const ConceptId> prereqs_of(ConceptId c) const;
  std::span<const ConceptId> dependents_of(ConceptId c) const;
  const std::vector<std::pair<ConceptId, ConceptId>>& edges() const {
    return edges_;
  }
  bool is_flat() const { return edges_.empty(); }

  // Prerequisites before dependents; ties by ascending id.
  std::vector<ConceptId> topological_order() const;

 private:
  std::vector<std::pair<ConceptId, ConceptId>> edges_;
  std::vector<std::vector<ConceptId>> prereqs_;
  std::vector<std::vector<ConceptId>> dependents_;
};

}  // namespace unier
