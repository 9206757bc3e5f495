#pragma once

// Knowledge-state simulator: a BKT-family filter that estimates mastery from
// a history, predicts responses, and simulates the effect of practicing a
// learning path. The same machinery backs the hidden ground-truth students
// used to generate synthetic logs.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "unier/core.hpp"
#include "unier/random.hpp"

namespace unier {

inline constexpr double kProbFloor = 0.001;
inline constexpr double kProbCeil = 0.999;

inline double clamp_prob(double p) {
  return p < kProbFloor ? kProbFloor : (p > kProbCeil ? kProbCeil : p);
}

// Per-concept BKT parameters, four arrays of length |C|.
struct BktParams {
  std::vector<double> p_init;
  std::vector<double> p_learn;
  std::vector<double> p_guess;
  std::vector<double> p_slip;

  static BktParams uniform(std::size_t num_concepts, double init, double learn,
                           double guess, double slip);
  // The fallback used for concepts without observations: (0.3, 0.2, 0.2, 0.1).
  static BktParams defaults(std::size_t num_concepts);

  std::size_t size() const { return p_init.size(); }

  // Throws InvalidArgument unless every array has the same length, every
  // value lies in (0, 1), and guess + slip < 1 per concept.
  void validate() const;

  friend bool operator==(const BktParams&, const BktParams&) = default;
};

struct ExpectedMode {};
struct SampledMode {
  std::size_t rollouts = 1;
  std::uint64_t seed = 0;
};
using SimMode = std::variant<ExpectedMode, SampledMode>;

// Probability of a correct response: mean mastery, guess and slip over the
// exercise's concepts, combined as m(1 - slip) + (1 - m) guess.
double predict_correct(const MasteryVector& m, ExerciseId e,
                       const BktParams& params, const QMatrix& q);

// Mean mastery of c's prerequisites, 1 when c has none.
double prerequisite_gate(std::span<const double> mastery, ConceptId c,
                         const PrerequisiteGraph& prereqs);

// Bayes posterior for each covered concept followed by the gated learning
// transit. Uncovered concepts are left untouched. The gate is read from the
// mastery before the update.
MasteryVector bkt_update(const MasteryVector& m, ExerciseId e, bool observed,
                         const BktParams& params, const QMatrix& q,
                         const PrerequisiteGraph& prereqs);

// Mixture of the two bkt_update branches weighted by predict_correct.
MasteryVector expected_update(const MasteryVector& m, ExerciseId e,
                              const BktParams& params, const QMatrix& q,
                              const PrerequisiteGraph& prereqs);

// Shared knowledge-tracing estimator. Holds no per-student state.
class Estimator {
 public:
  Estimator(QMatrix q, BktParams params);
  Estimator(QMatrix q, BktParams params, PrerequisiteGraph prereqs);

  const QMatrix& q() const { return q_; }
  const BktParams& params() const { return params_; }
  const PrerequisiteGraph& prereqs() const { return prereqs_; }
  std::size_t num_concepts() const { return q_.num_concepts(); }
  std::size_t num_exercises() const { return q_.num_exercises(); }

  MasteryVector prior() const;
  MasteryVector estimate(const History& h) const;

  double predict(const MasteryVector& m, ExerciseId e) const {
    return predict_correct(m, e, params_, q_);
  }
  MasteryVector update(const MasteryVector& m, ExerciseId e,
                       bool observed) const {
    return bkt_update(m, e, observed, params_, q_, prereqs_);
  }
  MasteryVector expected_step(const MasteryVector& m, ExerciseId e) const {
    return expected_update(m, e, params_, q_, prereqs_);
  }

  // Stable 64-bit hash of q, params and prerequisites, as 16 hex digits.
  std::string fingerprint() const;

 private:
  QMatrix q_;
  BktParams params_;
  PrerequisiteGraph prereqs_;
};

struct StepResponse {
  ExerciseId exercise = 0;
  // Predicted correctness under the mastery before this step (averaged over
  // rollouts in sampled mode).
  double p_correct = 0.0;
  // Fraction of rollouts answering correctly; empty in expected mode.
  std::optional<double> realized = std::nullopt;
};

struct SimulationResult {
  MasteryVector final_mastery;
  std::vector<StepResponse> responses;
};

SimulationResult simulate_path(const Estimator& est, const History& h,
                               const LearningPath& path, const SimMode& mode);

// Same as simulate_path, starting from an already-estimated mastery.
SimulationResult simulate_from(const Estimator& est, const MasteryVector& start,
                               const LearningPath& path, const SimMode& mode);

// Synthetic student with a hidden knowledge state. Not thread-safe: one
// owner at a time.
class GroundTruthStudent {
 public:
  GroundTruthStudent(MasteryVector hidden, BktParams params,
                     std::shared_ptr<const PrerequisiteGraph> prereqs,
                     std::shared_ptr<const QMatrix> q, std::uint64_t seed);

  // Draws a response from the hidden state, then updates the hidden state
  // with the drawn observation.
  bool respond(ExerciseId e);

  const MasteryVector& hidden_mastery() const { return hidden_; }
  const BktParams& params() const { return params_; }

 private:
  MasteryVector hidden_;
  BktParams params_;
  std::shared_ptr<const PrerequisiteGraph> prereqs_;
  std::shared_ptr<const QMatrix> q_;
  Rng rng_;
};

// Sum over concepts of the per-concept forward-filter log-likelihood of the
// observed correctness labels.
double bkt_log_likelihood(std::span<const History> logs, const QMatrix& q,
                          const BktParams& params,
                          const PrerequisiteGraph& prereqs);

// Per-concept coordinate grid search maximising bkt_log_likelihood. Concepts
// are fitted in prerequisite order so each gate is computed from already
// fitted ancestors. Concepts without observations keep the defaults.
BktParams fit_bkt(std::span<const History> logs, const QMatrix& q);
BktParams fit_bkt(std::span<const History> logs, const QMatrix& q,
                  const PrerequisiteGraph& prereqs);

}  // namespace unier
