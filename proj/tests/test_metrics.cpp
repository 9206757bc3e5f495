#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "unier/error.hpp"
#include "unier/metrics.hpp"
#include "unier/random.hpp"

using namespace unier;
using doctest::Approx;

TEST_CASE("unify_output sorts by score then id") {
  const RecommendationSet s({{0, 0.3}, {1, 0.9}, {2, 0.5}});
  CHECK(unify_output(s, 3) == testing::path({1, 2, 0}));
  CHECK(unify_output(s, 1) == testing::path({1}));
  const RecommendationSet tie({{1, 0.5}, {0, 0.5}});
  CHECK(unify_output(tie, 2) == testing::path({0, 1}));
  CHECK_THROWS_AS(unify_output(tie, 3), InvalidArgument);
}

TEST_CASE("TGA weights") {
  const std::vector<ConceptId> t13 = {1, 3};
  CHECK(build_tga_weights(t13, 4) == WeightVector({0, 0.5, 0, 0.5}));
  const std::vector<ConceptId> t0 = {0};
  CHECK(build_tga_weights(t0, 2) == WeightVector({1, 0}));
  CHECK_THROWS_AS(build_tga_weights({}, 2), InvalidArgument);
  const std::vector<ConceptId> out = {5};
  CHECK_THROWS_AS(build_tga_weights(out, 2), InvalidArgument);
}

TEST_CASE("GPP weights") {
  CHECK(build_gpp_weights(MasteryVector({0.9, 0.3, 0.4}), 0.5) == WeightVector({0, 0.5, 0.5}));
  CHECK(build_gpp_weights(MasteryVector({0.9, 0.9}), 0.5).all_zero());
  CHECK(build_gpp_weights(MasteryVector({0.1, 0.1, 0.1, 0.1}), 0.5) ==
        WeightVector({0.25, 0.25, 0.25, 0.25}));
  CHECK(unmastered_concepts(MasteryVector({0.5, 0.49}), 0.5) == std::vector<ConceptId>{1});
}

TEST_CASE("wcg closed forms on a single concept") {
  const Estimator est(testing::single_concept_bank(1), BktParams::uniform(1, 0.2, 0.3, 0.2, 0.1));
  const WeightVector w({1.0});
  CHECK(wcg(est, History{}, testing::path({0}), w, ExpectedMode{}) == Approx(0.24).epsilon(1e-12));
  CHECK(wcg(est, History{}, LearningPath{}, w, ExpectedMode{}) == 0.0);
  CHECK(wcg(est, History{}, testing::path({0, 0}), WeightVector::zeros(1), ExpectedMode{}) == 0.0);
  const LearningPath three = testing::path({0, 0, 0});
  CHECK(wcg_at_k(est, History{}, three, w, 2, ExpectedMode{}) ==
        Approx(0.8 * (1 - 0.49)).epsilon(1e-12));
  CHECK(wcg_at_k(est, History{}, three, w, 0, ExpectedMode{}) == 0.0);
  CHECK(wcg_at_k(est, History{}, three, w, 3, ExpectedMode{}) ==
        wcg(est, History{}, three, w, ExpectedMode{}));
  CHECK_THROWS_AS(wcg_at_k(est, History{}, three, w, 4, ExpectedMode{}), InvalidArgument);
}

TEST_CASE("wcg rejects mismatched weights and unknown exercises") {
  const Estimator est(testing::single_concept_bank(1), BktParams::defaults(1));
  CHECK_THROWS_AS(wcg(est, History{}, testing::path({0}), WeightVector::zeros(2), ExpectedMode{}),
                  InvalidArgument);
  CHECK_THROWS_AS(wcg(est, History{}, testing::path({3}), WeightVector({1.0}), ExpectedMode{}),
                  InvalidArgument);
}

TEST_CASE("wcg properties on random flat instances") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nc = 1 + uniform_index(rng, 4);
    std::vector<IncidencePair> pairs;
    const std::size_t ne = nc + uniform_index(rng, 4);
    for (ExerciseId e = 0; e < ne; ++e) pairs.emplace_back(e, e % nc);
    BktParams p = BktParams::defaults(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      p.p_init[c] = uniform_real(rng, 0.05, 0.9);
      p.p_learn[c] = uniform_real(rng, 0.05, 0.6);
    }
    const Estimator est(QMatrix::build(pairs, ne, nc), p);
    std::vector<double> wv(nc, 1.0 / static_cast<double>(nc));
    const WeightVector w(wv);
    LearningPath path;
    for (int i = 0; i < 6; ++i) path.steps.push_back(static_cast<ExerciseId>(uniform_index(rng, ne)));

    const double v = wcg(est, History{}, path, w, ExpectedMode{});
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);

    // Flat graph: order does not matter.
    LearningPath shuffled = path;
    shuffle(shuffled.steps, rng);
    CHECK(wcg(est, History{}, shuffled, w, ExpectedMode{}) == Approx(v).epsilon(1e-12));

    // Longer prefixes never lose gain.
    double prev = 0.0;
    for (std::size_t k = 0; k <= path.size(); ++k) {
      const double cur = wcg_at_k(est, History{}, path, w, k, ExpectedMode{});
      CHECK(cur >= prev - 1e-15);
      prev = cur;
    }
  }
}

TEST_CASE("order matters on a chain") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  const Estimator est(q, BktParams::uniform(2, 0.1, 0.4, 0.2, 0.1), PrerequisiteGraph::chain(2, 2));
  const WeightVector w({0.5, 0.5});
  const double forward = wcg(est, History{}, testing::path({0, 1}), w, ExpectedMode{});
  const double backward = wcg(est, History{}, testing::path({1, 0}), w, ExpectedMode{});
  CHECK(forward > backward);
}

TEST_CASE("weighted gain") {
  CHECK(weighted_gain(WeightVector({0.5, 0.5}), MasteryVector({0.2, 0.4}), MasteryVector({0.6, 0.4})) ==
        Approx(0.2));
}
