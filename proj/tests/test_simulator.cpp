#include <doctest.h>

#include <memory>

#include "helpers.hpp"
#include "unier/data.hpp"
#include "unier/error.hpp"
#include "unier/simulator.hpp"

using namespace unier;
using doctest::Approx;

namespace {

BktParams single(double init = 0.2) { return BktParams::uniform(1, init, 0.3, 0.2, 0.1); }

Estimator single_est(std::size_t ne = 1, double init = 0.2) {
  return Estimator(testing::single_concept_bank(ne), single(init));
}

}  // namespace

TEST_CASE("predict_correct on a single concept") {
  const QMatrix q = testing::single_concept_bank(1);
  const BktParams p = single();
  CHECK(predict_correct(MasteryVector({0.2}), 0, p, q) == Approx(0.34).epsilon(1e-12));
  CHECK(predict_correct(MasteryVector({1.0}), 0, p, q) == Approx(0.9).epsilon(1e-12));
  CHECK(predict_correct(MasteryVector({0.0}), 0, p, q) == Approx(0.2).epsilon(1e-12));
}

TEST_CASE("bkt_update hand-computed branches") {
  const QMatrix q = testing::single_concept_bank(1);
  const BktParams p = single();
  const auto g = PrerequisiteGraph::flat(1);
  const MasteryVector m({0.2});
  const double post_hit = 0.18 / 0.34;
  const double post_miss = 0.02 / 0.66;
  CHECK(bkt_update(m, 0, true, p, q, g)[0] == Approx(post_hit + (1 - post_hit) * 0.3).epsilon(1e-12));
  CHECK(bkt_update(m, 0, true, p, q, g)[0] == Approx(0.67059).epsilon(1e-5));
  CHECK(bkt_update(m, 0, false, p, q, g)[0] == Approx(post_miss + (1 - post_miss) * 0.3).epsilon(1e-12));
  CHECK(bkt_update(m, 0, false, p, q, g)[0] == Approx(0.32121).epsilon(1e-5));
}

TEST_CASE("bkt_update leaves uncovered concepts untouched") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  const BktParams p = BktParams::uniform(2, 0.2, 0.3, 0.2, 0.1);
  const MasteryVector m({0.2, 0.45});
  CHECK(bkt_update(m, 0, true, p, q, PrerequisiteGraph::flat(2))[1] == 0.45);
  CHECK(expected_update(m, 0, p, q, PrerequisiteGraph::flat(2))[1] == 0.45);
}

TEST_CASE("estimate folds the history from the prior") {
  const Estimator est = single_est();
  CHECK(est.estimate(History{}) == est.prior());
  CHECK(est.prior()[0] == 0.2);
  History h;
  h.append(0, true);
  CHECK(est.estimate(h)[0] == Approx(0.67059).epsilon(1e-5));
}

TEST_CASE("estimate is order-free across disjoint concepts on a flat graph") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  const Estimator est(q, BktParams::uniform(2, 0.2, 0.3, 0.2, 0.1));
  History a, b;
  a.append(0, true);
  a.append(1, false);
  b.append(1, false);
  b.append(0, true);
  const auto ma = est.estimate(a), mb = est.estimate(b);
  CHECK(ma[0] == Approx(mb[0]).epsilon(1e-15));
  CHECK(ma[1] == Approx(mb[1]).epsilon(1e-15));
}

TEST_CASE("expected-mode simulation on a single concept") {
  const Estimator est = single_est();
  const auto empty = simulate_path(est, History{}, LearningPath{}, ExpectedMode{});
  CHECK(empty.final_mastery == est.prior());
  CHECK(empty.responses.empty());
  const auto r = simulate_path(est, History{}, testing::path({0}), ExpectedMode{});
  CHECK(r.final_mastery[0] == Approx(0.44).epsilon(1e-12));
  CHECK(r.responses.size() == 1);
  CHECK(r.responses[0].p_correct == Approx(0.34).epsilon(1e-12));
  CHECK_FALSE(r.responses[0].realized.has_value());
  // Mixing the two branches by hand.
  CHECK(0.34 * 0.67059 + 0.66 * 0.32121 == Approx(0.44).epsilon(1e-4));
}

TEST_CASE("expected-mode growth ignores guess and slip") {
  for (double guess : {0.05, 0.2, 0.4}) {
    for (double slip : {0.05, 0.3}) {
      const Estimator est(testing::single_concept_bank(1),
                          BktParams::uniform(1, 0.2, 0.3, guess, slip));
      const auto r = simulate_path(est, History{}, testing::path({0}), ExpectedMode{});
      CHECK(r.final_mastery[0] == Approx(0.44).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampled mode converges to expected mode") {
  const Estimator est = single_est(3);
  const LearningPath p = testing::path({0, 1, 2, 0});
  const auto expected = simulate_path(est, History{}, p, ExpectedMode{});
  const auto sampled = simulate_path(est, History{}, p, SampledMode{10000, 7});
  CHECK(std::abs(sampled.final_mastery[0] - expected.final_mastery[0]) < 0.01);
  REQUIRE(sampled.responses[0].realized.has_value());
  CHECK(*sampled.responses[0].realized >= 0.0);
  CHECK(*sampled.responses[0].realized <= 1.0);
}

TEST_CASE("sampled mode is deterministic given its seed") {
  const Estimator est = single_est(2);
  const LearningPath p = testing::path({0, 1});
  const auto a = simulate_path(est, History{}, p, SampledMode{50, 3});
  const auto b = simulate_path(est, History{}, p, SampledMode{50, 3});
  CHECK(a.final_mastery == b.final_mastery);
}

TEST_CASE("prerequisite gate scales learning") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  const BktParams p = BktParams::uniform(2, 0.2, 0.3, 0.2, 0.1);
  const auto g = PrerequisiteGraph::chain(2, 2);
  CHECK(prerequisite_gate(std::vector<double>{0.4, 0.1}, 1, g) == Approx(0.4));
  CHECK(prerequisite_gate(std::vector<double>{0.4, 0.1}, 0, g) == 1.0);
  const auto low = expected_update(MasteryVector({0.1, 0.2}), 1, p, q, g)[1];
  const auto high = expected_update(MasteryVector({0.9, 0.2}), 1, p, q, g)[1];
  CHECK(low < high);
  CHECK(high == Approx(0.2 + 0.8 * 0.3 * 0.9).epsilon(1e-12));
}

TEST_CASE("ground-truth students are deterministic") {
  auto q = std::make_shared<const QMatrix>(testing::single_concept_bank(2));
  auto g = std::make_shared<const PrerequisiteGraph>(PrerequisiteGraph::flat(1));
  GroundTruthStudent a(MasteryVector({0.3}), single(), g, q, 11);
  GroundTruthStudent b(MasteryVector({0.3}), single(), g, q, 11);
  for (int i = 0; i < 50; ++i) CHECK(a.respond(i % 2) == b.respond(i % 2));
  CHECK(a.hidden_mastery() == b.hidden_mastery());
}

TEST_CASE("a fully mastered student with clamped slip almost always answers correctly") {
  auto q = std::make_shared<const QMatrix>(testing::single_concept_bank(1));
  auto g = std::make_shared<const PrerequisiteGraph>(PrerequisiteGraph::flat(1));
  BktParams p = BktParams::uniform(1, 0.5, 0.3, 0.2, kProbFloor);
  GroundTruthStudent s(MasteryVector({1.0}), p, g, q, 5);
  int correct = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) correct += s.respond(0) ? 1 : 0;
  CHECK(static_cast<double>(correct) / n > 0.995);
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(BktParams::defaults(3).validate());
  CHECK(BktParams::defaults(1) == BktParams::uniform(1, 0.3, 0.2, 0.2, 0.1));
  CHECK_THROWS_AS(BktParams::uniform(1, 0.2, 0.3, 0.6, 0.5).validate(), InvalidArgument);
  CHECK_THROWS_AS(BktParams::uniform(1, 0.0, 0.3, 0.2, 0.1).validate(), InvalidArgument);
  BktParams ragged = BktParams::defaults(2);
  ragged.p_slip.pop_back();
  CHECK_THROWS_AS(ragged.validate(), InvalidArgument);
}

TEST_CASE("fit_bkt falls back to defaults for unobserved concepts") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  History h;
  for (int i = 0; i < 20; ++i) h.append(0, i % 3 != 0);
  const std::vector<History> logs = {h};
  const BktParams fitted = fit_bkt(logs, q);
  CHECK(fitted.p_init[1] == 0.3);
  CHECK(fitted.p_learn[1] == 0.2);
  CHECK(fitted.p_guess[1] == 0.2);
  CHECK(fitted.p_slip[1] == 0.1);
  CHECK_NOTHROW(fitted.validate());
}

TEST_CASE("fit_bkt never does worse than the generating parameters") {
  SynthConfig cfg;
  cfg.students = 120;
  cfg.concepts = 2;
  cfg.exercises = 4;
  cfg.chain_depth = 1;
  cfg.log_length = 30;
  cfg.seed = 3;
  cfg.p_init = {0.2, 0.2};
  cfg.p_learn = {0.3, 0.3};
  cfg.p_guess = {0.2, 0.2};
  cfg.p_slip = {0.1, 0.1};
  const auto pop = synth_generate(cfg);
  const auto& d = pop.dataset;
  const BktParams fitted = fit_bkt(d.logs, d.q, d.prereqs);
  const double ll_fit = bkt_log_likelihood(d.logs, d.q, fitted, d.prereqs);
  const double ll_gen = bkt_log_likelihood(d.logs, d.q, cfg.center_params(), d.prereqs);
  CHECK(ll_fit >= ll_gen - 1e-6);
}

TEST_CASE("fingerprints identify the estimator contents") {
  const Estimator a = single_est();
  const Estimator b = single_est();
  const Estimator c = single_est(1, 0.25);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK(a.fingerprint().size() == 16);
}
