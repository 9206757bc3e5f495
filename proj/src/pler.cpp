#include "unier/pler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "unier/error.hpp"

namespace unier {

namespace {

void check_finite(const Features& w, const char* what) {
  for (double x : w) {
    if (!std::isfinite(x)) {
      throw NumericalError(std::string(what) +
                           " produced a non-finite weight; lower the step size");
    }
  }
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

std::vector<double> action_scores(const Features& w, const EnvState& s,
                                  const Estimator& est, double threshold) {
  std::vector<double> out(est.num_exercises());
  for (std::size_t a = 0; a < out.size(); ++a) {
    out[a] = dot(w, features(s, static_cast<ExerciseId>(a), est, threshold));
  }
  return out;
}

ExerciseId argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<ExerciseId>(best);
}

std::vector<double> softmax(const std::vector<double>& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - top);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

ExerciseId sample_index(const std::vector<double>& p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<ExerciseId>(i);
  }
  return static_cast<ExerciseId>(p.size() - 1);
}

}  // namespace

EnvState env_reset(const Estimator& est, const History& h, const TaskSpec& task,
                   std::size_t budget) {
  EnvState s;
  s.mastery = est.estimate(h);
  s.weights = build_weights(task, s.mastery, est.num_concepts());
  s.step = 0;
  s.budget = budget;
  return s;
}

StepResult env_step(const EnvState& state, ExerciseId action,
                    const Estimator& est, const SimMode& mode) {
  if (state.terminal()) throw InvalidArgument("stepping a terminal state");
  if (action >= est.num_exercises()) {
    throw InvalidArgument("action " + std::to_string(action) + " out of range");
  }
  if (state.weights.size() != est.num_concepts() ||
      state.mastery.size() != est.num_concepts()) {
    throw InvalidArgument("environment state dimension does not match estimator");
  }
  StepResult r;
  r.next = state;
  if (std::holds_alternative<ExpectedMode>(mode)) {
    r.next.mastery = est.expected_step(state.mastery, action);
  } else {
    SampledMode step_mode = std::get<SampledMode>(mode);
    step_mode.seed = derive_seed(step_mode.seed, state.step);
    r.next.mastery =
        simulate_from(est, state.mastery, LearningPath{{action}}, step_mode)
            .final_mastery;
  }
  r.next.step = state.step + 1;
  r.reward = weighted_gain(state.weights, state.mastery, r.next.mastery);
  r.done = r.next.terminal();
  return r;
}

Features features(const EnvState& s, ExerciseId action, const Estimator& est,
                  double threshold) {
  const auto concepts = est.q().concepts_of(action);
  Features phi{};
  double below = 0.0, gate = 0.0;
  for (ConceptId c : concepts) {
    phi[0] += s.weights[c] * (1.0 - s.mastery[c]);
    below += s.mastery[c] < threshold ? 1.0 : 0.0;
    gate += prerequisite_gate(s.mastery.values(), c, est.prereqs());
  }
  const double n = static_cast<double>(concepts.size());
  phi[1] = below / n;
  phi[2] = gate / n;
  phi[3] = s.budget == 0 ? 0.0
                         : static_cast<double>(s.step) / static_cast<double>(s.budget);
  phi[4] = 1.0;
  return phi;
}

Features state_features(const EnvState& s, double threshold) {
  Features phi{};
  const std::size_t n = s.mastery.size();
  double below = 0.0, mean = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    phi[0] += s.weights[c] * (1.0 - s.mastery[c]);
    below += s.mastery[c] < threshold ? 1.0 : 0.0;
    mean += s.mastery[c];
  }
  phi[1] = n == 0 ? 0.0 : below / static_cast<double>(n);
  phi[2] = n == 0 ? 0.0 : mean / static_cast<double>(n);
  phi[3] = s.budget == 0 ? 0.0
                         : static_cast<double>(s.step) / static_cast<double>(s.budget);
  phi[4] = 1.0;
  return phi;
}

double dot(const Features& a, const Features& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) s += a[i] * b[i];
  return s;
}

double LinearQ::epsilon_at(std::size_t episode, std::size_t episodes) const {
  const double horizon = decay_fraction * static_cast<double>(episodes);
  if (horizon <= 0.0) return epsilon_end;
  const double t = std::min(1.0, static_cast<double>(episode) / horizon);
  return epsilon_start + (epsilon_end - epsilon_start) * t;
}

void LinearQ::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (!in_unit_interval(epsilon_start) || !in_unit_interval(epsilon_end) ||
      !in_unit_interval(decay_fraction)) {
    throw InvalidArgument("epsilon schedule must lie in [0, 1]");
  }
  check_finite(weights, "value agent");
}

void SoftmaxPolicy::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(actor_step > 0.0) || !(critic_step > 0.0)) {
    throw InvalidArgument("actor and critic step sizes must be positive");
  }
  check_finite(actor, "policy agent");
  check_finite(critic, "policy agent");
}

Features td_semi_gradient(const Features& w, const Features& phi, double target) {
  const double err = target - dot(w, phi);
  Features g{};
  for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] = -err * phi[i];
  return g;
}

void td_update(Features& w, const Features& phi, double target, double step) {
  const Features g = td_semi_gradient(w, phi, target);
  for (std::size_t i = 0; i < kFeatureDim; ++i) w[i] -= step * g[i];
  check_finite(w, "TD update");
}

double max_q(const LinearQ& agent, const EnvState& s, const Estimator& est) {
  const auto q = action_scores(agent.weights, s, est, agent.threshold);
  return *std::max_element(q.begin(), q.end());
}

ExerciseId greedy_action(const LinearQ& agent, const EnvState& s,
                         const Estimator& est) {
  return argmax_lowest(action_scores(agent.weights, s, est, agent.threshold));
}

void dqn_update(LinearQ& agent, const Features& phi, double reward,
                const EnvState& next, bool done, const Estimator& est) {
  const double target = reward + (done ? 0.0 : agent.gamma * max_q(agent, next, est));
  td_update(agent.weights, phi, target, agent.alpha);
}

LinearQ dqn_train(const EpisodeFactory& factory, LinearQ agent,
                  const Estimator& est, std::size_t episodes,
                  std::uint64_t seed, const SimMode& mode) {
  if (episodes == 0) throw InvalidArgument("training needs at least one episode");
  agent.validate();
  Rng rng(seed);
  const std::size_t num_actions = est.num_exercises();
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    EnvState s = factory(rng);
    const double eps = agent.epsilon_at(ep, episodes);
    while (!s.terminal()) {
      ExerciseId a;
      if (bernoulli(rng, eps)) {
        a = static_cast<ExerciseId>(uniform_index(rng, num_actions));
      } else {
        a = greedy_action(agent, s, est);
      }
      const Features phi = features(s, a, est, agent.threshold);
      StepResult r = env_step(s, a, est, mode);
      dqn_update(agent, phi, r.reward, r.next, r.done, est);
      s = std::move(r.next);
    }
  }
  return agent;
}

std::vector<double> policy_probabilities(const SoftmaxPolicy& policy,
                                         const EnvState& s,
                                         const Estimator& est) {
  return softmax(action_scores(policy.actor, s, est, policy.threshold));
}

Features log_policy_gradient(const SoftmaxPolicy& policy, const EnvState& s,
                             ExerciseId action, const Estimator& est) {
  const auto p = policy_probabilities(policy, s, est);
  Features g = features(s, action, est, policy.threshold);
  for (std::size_t b = 0; b < p.size(); ++b) {
    const Features phi = features(s, static_cast<ExerciseId>(b), est, policy.threshold);
    for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] -= p[b] * phi[i];
  }
  return g;
}

ExerciseId greedy_action(const SoftmaxPolicy& policy, const EnvState& s,
                         const Estimator& est) {
  return argmax_lowest(action_scores(policy.actor, s, est, policy.threshold));
}

SoftmaxPolicy ac_train(const EpisodeFactory& factory, SoftmaxPolicy policy,
                       const Estimator& est, std::size_t episodes,
                       std::uint64_t seed, const SimMode& mode) {
  if (episodes == 0) throw InvalidArgument("training needs at least one episode");
  policy.validate();
  Rng rng(seed);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    EnvState s = factory(rng);
    while (!s.terminal()) {
      const ExerciseId a = sample_index(policy_probabilities(policy, s, est), rng);
      const Features grad = log_policy_gradient(policy, s, a, est);
      const Features phi_v = state_features(s, policy.threshold);
      StepResult r = env_step(s, a, est, mode);
      const double next_v =
          r.done ? 0.0 : dot(policy.critic, state_features(r.next, policy.threshold));
      const double delta = r.reward + policy.gamma * next_v - dot(policy.critic, phi_v);
      td_update(policy.critic, phi_v, dot(policy.critic, phi_v) + delta,
                policy.critic_step);
      for (std::size_t i = 0; i < kFeatureDim; ++i) {
        policy.actor[i] += policy.actor_step * delta * grad[i];
      }
      check_finite(policy.actor, "actor update");
      s = std::move(r.next);
    }
  }
  return policy;
}

LearningPath agent_recommend(const LinearQ& agent, const EnvState& start,
                             const Estimator& est, const SimMode& mode) {
  LearningPath path;
  EnvState s = start;
  while (!s.terminal()) {
    const ExerciseId a = greedy_action(agent, s, est);
    path.steps.push_back(a);
    s = env_step(s, a, est, mode).next;
  }
  return path;
}

LearningPath agent_recommend(const SoftmaxPolicy& policy, const EnvState& start,
                             const Estimator& est, bool greedy,
                             std::uint64_t seed, const SimMode& mode) {
  LearningPath path;
  Rng rng(seed);
  EnvState s = start;
  while (!s.terminal()) {
    const ExerciseId a =
        greedy ? greedy_action(policy, s, est)
               : sample_index(policy_probabilities(policy, s, est), rng);
    path.steps.push_back(a);
    s = env_step(s, a, est, mode).next;
  }
  return path;
}

LearningPath beam_plan(const Estimator& est, const History& h,
                       const TaskSpec& task, std::size_t budget,
                       std::size_t beam_width) {
  return beam_plan_from(est, env_reset(est, h, task, budget), beam_width);
}

LearningPath beam_plan_from(const Estimator& est, const EnvState& start,
                            std::size_t beam_width) {
  if (beam_width < 1) throw InvalidArgument("beam width must be at least 1");
  struct Node {
    std::vector<ExerciseId> seq;
    MasteryVector mastery;
    double score;
  };
  const std::size_t depth = start.budget - std::min(start.step, start.budget);
  std::vector<Node> beam{{{}, start.mastery, 0.0}};
  for (std::size_t d = 0; d < depth; ++d) {
    std::vector<Node> next;
    next.reserve(beam.size() * est.num_exercises());
    for (const Node& node : beam) {
      for (std::size_t a = 0; a < est.num_exercises(); ++a) {
        Node child{node.seq, est.expected_step(node.mastery, static_cast<ExerciseId>(a)), 0.0};
        child.seq.push_back(static_cast<ExerciseId>(a));
        // Scored against the start so identical states score identically.
        child.score = weighted_gain(start.weights, start.mastery, child.mastery);
        next.push_back(std::move(child));
      }
    }
    std::sort(next.begin(), next.end(), [](const Node& a, const Node& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.seq < b.seq;
    });
    beam.clear();
    std::set<std::vector<double>> seen;
    for (Node& node : next) {
      if (beam.size() == beam_width) break;
      std::vector<double> key(node.mastery.values().begin(), node.mastery.values().end());
      if (!seen.insert(std::move(key)).second) continue;
      beam.push_back(std::move(node));
    }
  }
  return LearningPath{beam.front().seq};
}

}  // namespace unier
