#pragma once

// Path-level recommenders. A finite-horizon MDP over the shared estimator,
// a linear value agent trained by one-step TD, a linear softmax
// actor-critic, and a model-based beam planner that scores whole paths.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "unier/core.hpp"
#include "unier/metrics.hpp"
#include "unier/random.hpp"
#include "unier/simulator.hpp"

namespace unier {

struct EnvState {
  MasteryVector mastery;
  WeightVector weights;
  std::size_t step = 0;
  std::size_t budget = 0;

  bool terminal() const { return step >= budget; }
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

EnvState env_reset(const Estimator& est, const History& h, const TaskSpec& task,
                   std::size_t budget);

// Applies one practice step. Reward is the weighted mastery gain of the step,
// so an episode's rewards sum to the WCG of the executed path. In sampled
// mode the step is simulated with a seed derived from (mode.seed, step).
StepResult env_step(const EnvState& state, ExerciseId action,
                    const Estimator& est, const SimMode& mode);

inline constexpr std::size_t kFeatureDim = 5;
using Features = std::array<double, kFeatureDim>;

// State-action features shared by both agents:
//   [0] sum of w_c (1 - m_c) over the action's concepts
//   [1] fraction of the action's concepts below the mastery threshold
//   [2] mean prerequisite gate of the action's concepts
//   [3] step / budget
//   [4] 1
Features features(const EnvState& s, ExerciseId action, const Estimator& est,
                  double threshold = kDefaultMasteryThreshold);

// Critic features:
//   [0] sum of w_c (1 - m_c) over all concepts
//   [1] fraction of concepts below the threshold
//   [2] mean mastery
//   [3] step / budget
//   [4] 1
Features state_features(const EnvState& s,
                        double threshold = kDefaultMasteryThreshold);

double dot(const Features& a, const Features& b);

// Produces a fresh start state for each training episode.
using EpisodeFactory = std::function<EnvState(Rng&)>;

struct LinearQ {
  Features weights{};
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Fraction of episodes over which epsilon decays linearly.
  double decay_fraction = 0.5;
  double threshold = kDefaultMasteryThreshold;

  double value(const Features& phi) const { return dot(weights, phi); }
  double epsilon_at(std::size_t episode, std::size_t episodes) const;
  void validate() const;
};

// Gradient of 0.5 (target - w.phi)^2 with the target held fixed.
Features td_semi_gradient(const Features& w, const Features& phi, double target);

// w <- w + alpha (target - w.phi) phi. Throws NumericalError on a
// non-finite result.
void td_update(Features& w, const Features& phi, double target, double step);

// Applies one transition to the Q weights. `next` is ignored when `done`.
void dqn_update(LinearQ& agent, const Features& phi, double reward,
                const EnvState& next, bool done, const Estimator& est);

double max_q(const LinearQ& agent, const EnvState& s, const Estimator& est);

// Arg-max over actions, ties by ascending id.
ExerciseId greedy_action(const LinearQ& agent, const EnvState& s,
                         const Estimator& est);

LinearQ dqn_train(const EpisodeFactory& factory, LinearQ agent,
                  const Estimator& est, std::size_t episodes,
                  std::uint64_t seed, const SimMode& mode = ExpectedMode{});

struct SoftmaxPolicy {
  Features actor{};
  Features critic{};
  double actor_step = 0.05;
  double critic_step = 0.05;
  double gamma = 0.9;
  double threshold = kDefaultMasteryThreshold;

  void validate() const;
};

// pi(a | s) over every exercise, softmax of actor . features.
std::vector<double> policy_probabilities(const SoftmaxPolicy& policy,
                                         const EnvState& s,
                                         const Estimator& est);

// d log pi(a | s) / d actor = phi(s, a) - sum_b pi(b | s) phi(s, b).
Features log_policy_gradient(const SoftmaxPolicy& policy, const EnvState& s,
                             ExerciseId action, const Estimator& est);

ExerciseId greedy_action(const SoftmaxPolicy& policy, const EnvState& s,
                         const Estimator& est);

SoftmaxPolicy ac_train(const EpisodeFactory& factory, SoftmaxPolicy policy,
                       const Estimator& est, std::size_t episodes,
                       std::uint64_t seed, const SimMode& mode = ExpectedMode{});

// Rolls the environment forward for the remaining budget. The value agent
// always acts greedily; the policy agent samples from pi when `greedy` is
// false.
LearningPath agent_recommend(const LinearQ& agent, const EnvState& start,
                             const Estimator& est,
                             const SimMode& mode = ExpectedMode{});
LearningPath agent_recommend(const SoftmaxPolicy& policy, const EnvState& start,
                             const Estimator& est, bool greedy = true,
                             std::uint64_t seed = 0,
                             const SimMode& mode = ExpectedMode{});

// Beam search over exercise sequences using expected-mode simulation as the
// transition model and cumulative weighted gain as the score. Prefixes that
// reach an identical state are merged, keeping the lexicographically
// smaller one. Ties are broken by the lexicographically smaller sequence.
LearningPath beam_plan(const Estimator& est, const History& h,
                       const TaskSpec& task, std::size_t budget,
                       std::size_t beam_width);
LearningPath beam_plan_from(const Estimator& est, const EnvState& start,
                            std::size_t beam_width);

}  // namespace unier
