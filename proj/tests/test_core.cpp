#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "unier/core.hpp"
#include "unier/error.hpp"

using namespace unier;

TEST_CASE("q-matrix builds rows and columns from pairs") {
  const std::vector<IncidencePair> pairs = {{0, 0}, {1, 1}, {2, 0}, {2, 1}};
  const QMatrix q = QMatrix::build(pairs, 3, 2);
  CHECK(q.num_exercises() == 3);
  CHECK(q.num_concepts() == 2);
  CHECK(std::vector<ConceptId>(q.concepts_of(2).begin(), q.concepts_of(2).end()) ==
        std::vector<ConceptId>{0, 1});
  CHECK(std::vector<ConceptId>(q.concepts_of(0).begin(), q.concepts_of(0).end()) ==
        std::vector<ConceptId>{0});
  CHECK(q.contains(1, 1));
  CHECK_FALSE(q.contains(1, 0));
  // Columns are the transpose of the rows.
  for (ConceptId c = 0; c < 2; ++c) {
    for (ExerciseId e : q.exercises_of(c)) CHECK(q.contains(e, c));
  }
  CHECK(q.exercises_of(0).size() + q.exercises_of(1).size() == 4);
}

TEST_CASE("q-matrix rejects empty rows and out-of-range ids") {
  CHECK_THROWS_AS(QMatrix::build({}, 1, 1), InvalidArgument);
  const std::vector<IncidencePair> bad_c = {{0, 3}};
  CHECK_THROWS_AS(QMatrix::build(bad_c, 1, 2), InvalidArgument);
  const std::vector<IncidencePair> bad_e = {{4, 0}};
  CHECK_THROWS_AS(QMatrix::build(bad_e, 1, 1), InvalidArgument);
  const QMatrix q = testing::q_from_rows({{0}, {1}, {0, 1}}, 2);
  CHECK_THROWS_AS(q.concepts_of(5), InvalidArgument);
  CHECK_THROWS_AS(q.exercises_of(2), InvalidArgument);
}

TEST_CASE("q-matrix deduplicates repeated pairs") {
  const std::vector<IncidencePair> pairs = {{0, 0}, {0, 0}};
  const QMatrix q = QMatrix::build(pairs, 1, 1);
  CHECK(q.concepts_of(0).size() == 1);
  CHECK(q.pairs().size() == 1);
}

TEST_CASE("mastery vectors stay inside the unit interval") {
  CHECK_NOTHROW(MasteryVector({0.0, 0.5, 1.0}));
  CHECK_THROWS_AS(MasteryVector({1.5}), InvalidArgument);
  CHECK_THROWS_AS(MasteryVector({-0.1}), InvalidArgument);
  CHECK_THROWS_AS(MasteryVector({std::nan("")}), InvalidArgument);
  CHECK(MasteryVector::filled(3, 0.25)[2] == 0.25);
}

TEST_CASE("weight vectors are all zero or sum to one") {
  CHECK_NOTHROW(WeightVector({0.5, 0.5}));
  CHECK(WeightVector::zeros(3).all_zero());
  CHECK_THROWS_AS(WeightVector({0.5, 0.4}), InvalidArgument);
  CHECK_THROWS_AS(WeightVector({1.5, -0.5}), InvalidArgument);
}

TEST_CASE("recommendation sets reject duplicates and non-finite scores") {
  CHECK_THROWS_AS(RecommendationSet({{1, 0.5}, {1, 0.2}}), InvalidArgument);
  CHECK_THROWS_AS(RecommendationSet({{1, std::numeric_limits<double>::infinity()}}),
                  InvalidArgument);
  const RecommendationSet s({{3, 0.1}, {1, 0.2}});
  CHECK(s.ids() == std::vector<ExerciseId>{1, 3});
  CHECK(s.contains(3));
  CHECK_FALSE(s.contains(2));
}

TEST_CASE("path prefixes") {
  const LearningPath p = testing::path({4, 2, 4});
  CHECK(p.prefix(0).empty());
  CHECK(p.prefix(2) == testing::path({4, 2}));
  CHECK(p.prefix(3) == p);
  CHECK_THROWS_AS(p.prefix(4), InvalidArgument);
}

TEST_CASE("prerequisite graphs are acyclic and range-checked") {
  CHECK_THROWS_AS(PrerequisiteGraph(2, {{0, 1}, {1, 0}}), InvalidArgument);
  CHECK_THROWS_AS(PrerequisiteGraph(2, {{0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(PrerequisiteGraph(2, {{0, 2}}), InvalidArgument);
  CHECK_THROWS_AS(PrerequisiteGraph(3, {{0, 1}, {0, 1}}), InvalidArgument);
  const PrerequisiteGraph g(4, {{2, 1}, {1, 0}, {3, 0}});
  const auto order = g.topological_order();
  auto pos = [&](ConceptId c) { return std::find(order.begin(), order.end(), c) - order.begin(); };
  for (const auto& [p, d] : g.edges()) CHECK(pos(p) < pos(d));
  CHECK(g.prereqs_of(0).size() == 2);
  CHECK(g.dependents_of(1).size() == 1);
}

TEST_CASE("chain graphs link the first depth concepts") {
  const auto g = PrerequisiteGraph::chain(5, 3);
  CHECK(g.edges().size() == 2);
  CHECK(g.prereqs_of(2).size() == 1);
  CHECK(g.prereqs_of(3).empty());
  CHECK(PrerequisiteGraph::chain(4, 1).is_flat());
  CHECK(PrerequisiteGraph::flat(3).is_flat());
  CHECK_THROWS_AS(PrerequisiteGraph::chain(2, 3), InvalidArgument);
}

TEST_CASE("history validation") {
  History h;
  h.append(0, true);
  h.append(2, false);
  CHECK(h.items[1].step == 1);
  CHECK_NOTHROW(validate_history(h, 3));
  CHECK_THROWS_AS(validate_history(h, 2), InvalidArgument);
}
