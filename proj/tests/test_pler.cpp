#include <doctest.h>

#include <limits>

#include "helpers.hpp"
#include "unier/error.hpp"
#include "unier/pler.hpp"
#include "unier/serialize.hpp"

using namespace unier;
using doctest::Approx;

namespace {

Estimator single_est(std::size_t ne = 1) {
  return Estimator(testing::single_concept_bank(ne), BktParams::uniform(1, 0.2, 0.3, 0.2, 0.1));
}

EnvState weighted_start(const Estimator& est, std::vector<double> w, std::size_t budget) {
  EnvState s;
  s.mastery = est.prior();
  s.weights = WeightVector(std::move(w));
  s.budget = budget;
  return s;
}

double path_value(const Estimator& est, const EnvState& start, const LearningPath& p) {
  const auto end = simulate_from(est, start.mastery, p, ExpectedMode{}).final_mastery;
  return weighted_gain(start.weights, start.mastery, end);
}

// Best path by full enumeration, lexicographically smallest among ties.
LearningPath exhaustive(const Estimator& est, const EnvState& start) {
  const std::size_t ne = est.num_exercises();
  const std::size_t len = start.budget;
  std::size_t total = 1;
  for (std::size_t i = 0; i < len; ++i) total *= ne;
  LearningPath best;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < total; ++code) {
    LearningPath p;
    std::size_t x = code;
    p.steps.resize(len);
    for (std::size_t i = len; i-- > 0;) {
      p.steps[i] = static_cast<ExerciseId>(x % ne);
      x /= ne;
    }
    const double v = path_value(est, start, p);
    if (v > best_v + 1e-15) {
      best_v = v;
      best = p;
    }
  }
  return best;
}

LearningPath myopic(const Estimator& est, const EnvState& start) {
  LearningPath p;
  EnvState s = start;
  while (!s.terminal()) {
    ExerciseId best = 0;
    double best_r = -1.0;
    for (ExerciseId a = 0; a < est.num_exercises(); ++a) {
      const double r = env_step(s, a, est, ExpectedMode{}).reward;
      if (r > best_r) {
        best_r = r;
        best = a;
      }
    }
    p.steps.push_back(best);
    s = env_step(s, best, est, ExpectedMode{}).next;
  }
  return p;
}

Estimator two_chain() {
  const QMatrix q = testing::q_from_rows({{0}, {1}, {1}}, 2);
  BktParams p = BktParams::uniform(2, 0.1, 0.4, 0.2, 0.1);
  p.p_init = {0.2, 0.1};
  return Estimator(q, p, PrerequisiteGraph::chain(2, 2));
}

}  // namespace

TEST_CASE("environment reset") {
  const Estimator est = single_est();
  const EnvState s = env_reset(est, History{}, GppTask{}, 10);
  CHECK(s.mastery == est.prior());
  CHECK(s.weights == WeightVector({1.0}));
  CHECK(s.budget == 10);
  EnvState cur = s;
  std::size_t steps = 0;
  while (!cur.terminal()) {
    cur = env_step(cur, 0, est, ExpectedMode{}).next;
    ++steps;
  }
  CHECK(steps == 10);
}

TEST_CASE("an all-mastered GPP state yields zero rewards") {
  const Estimator est(testing::single_concept_bank(1), BktParams::uniform(1, 0.9, 0.3, 0.2, 0.1));
  const EnvState s = env_reset(est, History{}, GppTask{0.5}, 3);
  CHECK(s.weights.all_zero());
  CHECK(env_step(s, 0, est, ExpectedMode{}).reward == 0.0);
}

TEST_CASE("environment step rewards") {
  const Estimator est = single_est();
  const EnvState s = weighted_start(est, {1.0}, 2);
  const auto r = env_step(s, 0, est, ExpectedMode{});
  CHECK(r.reward == Approx(0.24).epsilon(1e-12));
  CHECK_FALSE(r.done);
  CHECK(env_step(r.next, 0, est, ExpectedMode{}).done);

  const Estimator two(testing::q_from_rows({{0}, {1}}, 2), BktParams::uniform(2, 0.2, 0.3, 0.2, 0.1));
  CHECK(env_step(weighted_start(two, {1.0, 0.0}, 1), 1, two, ExpectedMode{}).reward == 0.0);
  CHECK_THROWS_AS(env_step(s, 4, est, ExpectedMode{}), InvalidArgument);
  EnvState done = s;
  done.step = 2;
  CHECK_THROWS_AS(env_step(done, 0, est, ExpectedMode{}), InvalidArgument);
}

TEST_CASE("episode rewards telescope to wcg") {
  const Estimator est = testing::chain5_estimator();
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    EnvState s = env_reset(est, History{}, GppTask{}, 5);
    LearningPath p;
    double total = 0.0;
    while (!s.terminal()) {
      const auto a = static_cast<ExerciseId>(uniform_index(rng, est.num_exercises()));
      p.steps.push_back(a);
      auto r = env_step(s, a, est, ExpectedMode{});
      total += r.reward;
      s = r.next;
    }
    const WeightVector w = build_gpp_weights(est.prior(), kDefaultMasteryThreshold);
    CHECK(total == Approx(wcg(est, History{}, p, w, ExpectedMode{})).epsilon(1e-9));
  }
}

TEST_CASE("features") {
  const Estimator est(testing::single_concept_bank(2), BktParams::uniform(1, 0.2, 0.3, 0.2, 0.1));
  EnvState s = weighted_start(est, {1.0}, 4);
  const Features start = features(s, 0, est);
  CHECK(start[0] == Approx(0.8));
  CHECK(start[1] == 1.0);
  CHECK(start[3] == 0.0);
  CHECK(start[4] == 1.0);
  s.mastery = MasteryVector({1.0});
  s.step = 2;
  const Features full = features(s, 1, est);
  CHECK(full[0] == 0.0);
  CHECK(full[1] == 0.0);
  CHECK(full[3] == Approx(0.5));
}

TEST_CASE("single TD step by hand") {
  Features w{};
  const Features phi{1, 0, 0, 0, 0};
  td_update(w, phi, 1.0, 0.1);
  CHECK(w[0] == Approx(0.1));
  for (std::size_t i = 1; i < kFeatureDim; ++i) CHECK(w[i] == 0.0);

  LinearQ agent;
  const Estimator est = single_est();
  EnvState terminal = weighted_start(est, {1.0}, 1);
  terminal.step = 1;
  dqn_update(agent, phi, 1.0, terminal, true, est);
  CHECK(agent.weights[0] == Approx(0.1));
}

TEST_CASE("divergent TD steps raise") {
  Features w{};
  const double big = 1e200;
  const Features phi{big, big, big, big, big};
  CHECK_THROWS_AS(td_update(w, phi, big, big), NumericalError);
}

TEST_CASE("greedy action is the arg-max") {
  const QMatrix q = testing::q_from_rows({{0}, {1}}, 2);
  const Estimator est(q, BktParams::uniform(2, 0.2, 0.3, 0.2, 0.1));
  EnvState s = weighted_start(est, {0.5, 0.5}, 1);
  s.mastery = MasteryVector({0.9, 0.1});
  LinearQ agent;
  agent.weights = {1, 0, 0, 0, 0};
  // Q values 0.05 and 0.45.
  CHECK(greedy_action(agent, s, est) == 1);
  agent.weights = {0, 0, 0, 0, 1};
  CHECK(greedy_action(agent, s, est) == 0);
}

TEST_CASE("zero rewards keep zero weights") {
  const Estimator est(testing::single_concept_bank(2), BktParams::uniform(1, 0.9, 0.3, 0.2, 0.1));
  const EpisodeFactory factory = [&](Rng&) { return env_reset(est, History{}, GppTask{}, 3); };
  const LinearQ trained = dqn_train(factory, LinearQ{}, est, 50, 1);
  for (double x : trained.weights) CHECK(x == 0.0);
}

TEST_CASE("epsilon schedule and validation") {
  LinearQ agent;
  CHECK(agent.epsilon_at(0, 100) == 1.0);
  CHECK(agent.epsilon_at(50, 100) == Approx(0.05));
  CHECK(agent.epsilon_at(99, 100) == Approx(0.05));
  agent.gamma = 1.0;
  CHECK_THROWS_AS(agent.validate(), InvalidArgument);
  SoftmaxPolicy policy;
  policy.actor_step = 0.0;
  CHECK_THROWS_AS(policy.validate(), InvalidArgument);
}

TEST_CASE("softmax policy") {
  const Estimator est = testing::chain5_estimator();
  const EnvState s = env_reset(est, History{}, GppTask{}, 5);
  SoftmaxPolicy policy;
  for (double p : policy_probabilities(policy, s, est)) CHECK(p == Approx(0.1));
  policy.actor = {0.7, -0.2, 0.4, 0.1, 0.0};
  const auto base = policy_probabilities(policy, s, est);
  policy.actor[4] = 25.0;
  const auto shifted = policy_probabilities(policy, s, est);
  double total = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(shifted[i] == Approx(base[i]).epsilon(1e-12));
    total += base[i];
  }
  CHECK(total == Approx(1.0));
}

TEST_CASE("agents return a path of exactly the budget") {
  const Estimator est = testing::chain5_estimator();
  const EnvState s = env_reset(est, History{}, GppTask{}, 10);
  CHECK(agent_recommend(LinearQ{}, s, est).size() == 10);
  CHECK(agent_recommend(SoftmaxPolicy{}, s, est).size() == 10);
  CHECK(agent_recommend(SoftmaxPolicy{}, s, est, false, 3).size() == 10);
  CHECK(beam_plan_from(est, s, 4).size() == 10);
}

TEST_CASE("trained agents are deterministic given the seed") {
  const Estimator est = testing::chain5_estimator();
  const EpisodeFactory factory = [&](Rng&) { return env_reset(est, History{}, GppTask{}, 5); };
  const auto a = dqn_train(factory, LinearQ{}, est, 100, 9);
  const auto b = dqn_train(factory, LinearQ{}, est, 100, 9);
  CHECK(a.weights == b.weights);
  const auto c = ac_train(factory, SoftmaxPolicy{}, est, 100, 9);
  const auto d = ac_train(factory, SoftmaxPolicy{}, est, 100, 9);
  CHECK(c.actor == d.actor);
  CHECK(c.critic == d.critic);
}

TEST_CASE("beam width 1 is the myopic planner") {
  const Estimator est = testing::chain5_estimator();
  const EnvState s = env_reset(est, History{}, GppTask{}, 5);
  CHECK(beam_plan_from(est, s, 1) == myopic(est, s));
  const Estimator two = two_chain();
  const EnvState t = env_reset(two, History{}, GppTask{}, 4);
  CHECK(beam_plan_from(two, t, 1) == myopic(two, t));
}

TEST_CASE("a wide beam matches full enumeration on tiny instances") {
  const Estimator est = two_chain();
  const EnvState s = env_reset(est, History{}, GppTask{}, 3);
  const LearningPath opt = exhaustive(est, s);
  const LearningPath beam = beam_plan_from(est, s, 27);
  CHECK(path_value(est, s, beam) == Approx(path_value(est, s, opt)).epsilon(1e-12));
  CHECK_THROWS_AS(beam_plan_from(est, s, 0), InvalidArgument);
}

TEST_CASE("beam ties on a single-concept bank pick the lowest id") {
  const Estimator est = single_est(3);
  const EnvState s = weighted_start(est, {1.0}, 3);
  CHECK(beam_plan_from(est, s, 8) == testing::path({0, 0, 0}));
}

TEST_CASE("beam score does not drop with width on these fixtures") {
  const Estimator est = testing::chain5_estimator();
  const EnvState s = env_reset(est, History{}, GppTask{}, 5);
  double prev = -1.0;
  for (std::size_t width : {1, 2, 4, 8, 16, 32}) {
    const double v = path_value(est, s, beam_plan_from(est, s, width));
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("the planner practices a prerequisite before its dependent") {
  const Estimator est = two_chain();
  EnvState s = env_reset(est, History{}, TgaTask{{1}}, 3);
  const LearningPath p = beam_plan_from(est, s, 9);
  REQUIRE(p.size() == 3);
  CHECK(p.steps[0] == 0);
  CHECK(path_value(est, s, p) == Approx(path_value(est, s, exhaustive(est, s))).epsilon(1e-12));
}

TEST_CASE("agents round-trip through JSON") {
  LinearQ q;
  q.weights = {0.1, -0.2, 0.3, 0.0, 1e-17};
  q.alpha = 0.05;
  const LinearQ q2 = linear_q_from_json(to_json(q));
  CHECK(q2.weights == q.weights);
  CHECK(q2.alpha == q.alpha);
  CHECK(q2.gamma == q.gamma);

  SoftmaxPolicy p;
  p.actor = {1, 2, 3, 4, 5};
  p.critic = {-1, 0.5, 0, 0, 0.25};
  p.gamma = 0.8;
  const SoftmaxPolicy p2 = softmax_policy_from_json(to_json(p));
  CHECK(p2.actor == p.actor);
  CHECK(p2.critic == p.critic);
  CHECK(p2.gamma == p.gamma);

  const BktParams b = BktParams::uniform(3, 0.2, 0.3, 0.2, 0.1);
  CHECK(bkt_params_from_json(to_json(b)) == b);
  nlohmann::json bad = to_json(q);
  bad["feature_dim"] = 4;
  CHECK_THROWS(linear_q_from_json(bad));
}
