#include "unier/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "unier/error.hpp"

namespace unier {

namespace {

double posterior(double m, double guess, double slip, bool observed) {
  if (observed) {
    const double num = m * (1.0 - slip);
    return num / (num + (1.0 - m) * guess);
  }
  const double num = m * slip;
  return num / (num + (1.0 - m) * (1.0 - guess));
}

double clamp_unit(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

void check_dims(const MasteryVector& m, const BktParams& params,
                const QMatrix& q) {
  if (m.size() != q.num_concepts() || params.size() != q.num_concepts()) {
    throw InvalidArgument("mastery/params dimension does not match q-matrix");
  }
}

// Posterior-then-transit for every covered concept, written into `out`.
void update_into(std::span<const double> m, ExerciseId e, bool observed,
                 const BktParams& params, const QMatrix& q,
                 const PrerequisiteGraph& prereqs, std::vector<double>& out) {
  for (ConceptId c : q.concepts_of(e)) {
    const double post = posterior(m[c], clamp_prob(params.p_guess[c]),
                                  clamp_prob(params.p_slip[c]), observed);
    const double learn =
        clamp_prob(params.p_learn[c]) * prerequisite_gate(m, c, prereqs);
    out[c] = clamp_unit(post + (1.0 - post) * learn);
  }
}

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
};

}  // namespace

BktParams BktParams::uniform(std::size_t num_concepts, double init,
                             double learn, double guess, double slip) {
  return BktParams{std::vector<double>(num_concepts, init),
                   std::vector<double>(num_concepts, learn),
                   std::vector<double>(num_concepts, guess),
                   std::vector<double>(num_concepts, slip)};
}

BktParams BktParams::defaults(std::size_t num_concepts) {
  return uniform(num_concepts, 0.3, 0.2, 0.2, 0.1);
}

void BktParams::validate() const {
  const std::size_t n = p_init.size();
  if (p_learn.size() != n || p_guess.size() != n || p_slip.size() != n) {
    throw InvalidArgument("BKT parameter arrays differ in length");
  }
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  for (std::size_t c = 0; c < n; ++c) {
    if (!open_unit(p_init[c]) || !open_unit(p_learn[c]) ||
        !open_unit(p_guess[c]) || !open_unit(p_slip[c])) {
      throw InvalidArgument("BKT parameter of concept " + std::to_string(c) +
                            " outside (0, 1)");
    }
    if (p_guess[c] + p_slip[c] >= 1.0) {
      throw InvalidArgument("guess + slip must be below 1 for concept " +
                            std::to_string(c));
    }
  }
}

double predict_correct(const MasteryVector& m, ExerciseId e,
                       const BktParams& params, const QMatrix& q) {
  check_dims(m, params, q);
  const auto concepts = q.concepts_of(e);
  double mastery = 0.0, guess = 0.0, slip = 0.0;
  for (ConceptId c : concepts) {
    mastery += m[c];
    guess += clamp_prob(params.p_guess[c]);
    slip += clamp_prob(params.p_slip[c]);
  }
  const double n = static_cast<double>(concepts.size());
  mastery /= n;
  guess /= n;
  slip /= n;
  return mastery * (1.0 - slip) + (1.0 - mastery) * guess;
}

double prerequisite_gate(std::span<const double> mastery, ConceptId c,
                         const PrerequisiteGraph& prereqs) {
  const auto pre = prereqs.prereqs_of(c);
  if (pre.empty()) return 1.0;
  double sum = 0.0;
  for (ConceptId p : pre) sum += mastery[p];
  return sum / static_cast<double>(pre.size());
}

MasteryVector bkt_update(const MasteryVector& m, ExerciseId e, bool observed,
                         const BktParams& params, const QMatrix& q,
                         const PrerequisiteGraph& prereqs) {
  check_dims(m, params, q);
  std::vector<double> out(m.values().begin(), m.values().end());
  update_into(m.values(), e, observed, params, q, prereqs, out);
  return MasteryVector(std::move(out));
}

MasteryVector expected_update(const MasteryVector& m, ExerciseId e,
                              const BktParams& params, const QMatrix& q,
                              const PrerequisiteGraph& prereqs) {
  const double p = predict_correct(m, e, params, q);
  std::vector<double> hit(m.values().begin(), m.values().end());
  std::vector<double> miss = hit;
  update_into(m.values(), e, true, params, q, prereqs, hit);
  update_into(m.values(), e, false, params, q, prereqs, miss);
  for (ConceptId c : q.concepts_of(e)) {
    hit[c] = clamp_unit(p * hit[c] + (1.0 - p) * miss[c]);
  }
  return MasteryVector(std::move(hit));
}

Estimator::Estimator(QMatrix q, BktParams params)
    : Estimator(q, std::move(params), PrerequisiteGraph::flat(q.num_concepts())) {}

Estimator::Estimator(QMatrix q, BktParams params, PrerequisiteGraph prereqs)
    : q_(std::move(q)), params_(std::move(params)), prereqs_(std::move(prereqs)) {
  params_.validate();
  if (params_.size() != q_.num_concepts() ||
      prereqs_.num_concepts() != q_.num_concepts()) {
    throw InvalidArgument("estimator components disagree on concept count");
  }
}

MasteryVector Estimator::prior() const {
  std::vector<double> m(params_.p_init.size());
  for (std::size_t c = 0; c < m.size(); ++c) m[c] = clamp_prob(params_.p_init[c]);
  return MasteryVector(std::move(m));
}

MasteryVector Estimator::estimate(const History& h) const {
  const MasteryVector start = prior();
  std::vector<double> m(start.values().begin(), start.values().end());
  std::vector<double> next = m;
  for (const auto& it : h.items) {
    if (it.exercise >= q_.num_exercises()) {
      throw InvalidArgument("history references exercise " +
                            std::to_string(it.exercise) + " out of range");
    }
    update_into(m, it.exercise, it.correct, params_, q_, prereqs_, next);
    m = next;
  }
  return MasteryVector(std::move(m));
}

std::string Estimator::fingerprint() const {
  Fnv1a f;
  f.u64(q_.num_exercises());
  f.u64(q_.num_concepts());
  for (const auto& [e, c] : q_.pairs()) {
    f.u64(e);
    f.u64(c);
  }
  for (const auto* v : {&params_.p_init, &params_.p_learn, &params_.p_guess,
                        &params_.p_slip}) {
    for (double x : *v) f.f64(x);
  }
  for (const auto& [p, d] : prereqs_.edges()) {
    f.u64(p);
    f.u64(d);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(f.h));
  return buf;
}

SimulationResult simulate_path(const Estimator& est, const History& h,
                               const LearningPath& path, const SimMode& mode) {
  return simulate_from(est, est.estimate(h), path, mode);
}

SimulationResult simulate_from(const Estimator& est, const MasteryVector& start,
                               const LearningPath& path, const SimMode& mode) {
  for (ExerciseId e : path.steps) {
    if (e >= est.num_exercises()) {
      throw InvalidArgument("path references exercise " + std::to_string(e) +
                            " out of range");
    }
  }
  SimulationResult result;
  result.responses.reserve(path.size());

  if (std::holds_alternative<ExpectedMode>(mode)) {
    MasteryVector m = start;
    for (ExerciseId e : path.steps) {
      result.responses.push_back({e, est.predict(m, e), std::nullopt});
      m = est.expected_step(m, e);
    }
    result.final_mastery = std::move(m);
    return result;
  }

  const auto& sampled = std::get<SampledMode>(mode);
  if (sampled.rollouts == 0) {
    throw InvalidArgument("sampled mode needs at least one rollout");
  }
  Rng rng(sampled.seed);
  const std::size_t n = est.num_concepts();
  std::vector<double> mean(n, 0.0);
  std::vector<double> p_sum(path.size(), 0.0);
  std::vector<double> hits(path.size(), 0.0);
  for (std::size_t r = 0; r < sampled.rollouts; ++r) {
    MasteryVector m = start;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const double p = est.predict(m, path.steps[i]);
      const bool obs = bernoulli(rng, p);
      p_sum[i] += p;
      hits[i] += obs ? 1.0 : 0.0;
      m = est.update(m, path.steps[i], obs);
    }
    for (std::size_t c = 0; c < n; ++c) mean[c] += m[c];
  }
  const double rollouts = static_cast<double>(sampled.rollouts);
  for (auto& v : mean) v = clamp_unit(v / rollouts);
  for (std::size_t i = 0; i < path.size(); ++i) {
    result.responses.push_back(
        {path.steps[i], p_sum[i] / rollouts, hits[i] / rollouts});
  }
  result.final_mastery = MasteryVector(std::move(mean));
  return result;
}

GroundTruthStudent::GroundTruthStudent(
    MasteryVector hidden, BktParams params,
    std::shared_ptr<const PrerequisiteGraph> prereqs,
    std::shared_ptr<const QMatrix> q, std::uint64_t seed)
    : hidden_(std::move(hidden)),
      params_(std::move(params)),
      prereqs_(std::move(prereqs)),
      q_(std::move(q)),
      rng_(seed) {
  params_.validate();
  if (!q_ || !prereqs_ || hidden_.size() != q_->num_concepts() ||
      params_.size() != q_->num_concepts() ||
      prereqs_->num_concepts() != q_->num_concepts()) {
    throw InvalidArgument("ground-truth student components disagree");
  }
}

bool GroundTruthStudent::respond(ExerciseId e) {
  const double p = predict_correct(hidden_, e, params_, *q_);
  const bool observed = bernoulli(rng_, p);
  hidden_ = bkt_update(hidden_, e, observed, params_, *q_, *prereqs_);
  return observed;
}

namespace {

// (gate, observed) for every interaction touching one concept.
struct Observation {
  double gate;
  bool correct;
};
using ConceptSequences = std::vector<std::vector<Observation>>;

double concept_log_likelihood(const ConceptSequences& seqs, double init,
                              double learn, double guess, double slip) {
  init = clamp_prob(init);
  learn = clamp_prob(learn);
  guess = clamp_prob(guess);
  slip = clamp_prob(slip);
  double ll = 0.0;
  for (const auto& seq : seqs) {
    double m = init;
    for (const auto& ob : seq) {
      const double p = m * (1.0 - slip) + (1.0 - m) * guess;
      ll += std::log(ob.correct ? p : 1.0 - p);
      const double post = posterior(m, guess, slip, ob.correct);
      m = post + (1.0 - post) * learn * ob.gate;
    }
  }
  return ll;
}

ConceptSequences collect_sequences(std::span<const History> logs,
                                   const QMatrix& q, const BktParams& params,
                                   const PrerequisiteGraph& prereqs,
                                   ConceptId c) {
  ConceptSequences seqs;
  const bool gated = !prereqs.prereqs_of(c).empty();
  std::vector<double> m, next;
  for (const auto& h : logs) {
    std::vector<Observation> seq;
    if (gated) {
      m.assign(params.p_init.size(), 0.0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = clamp_prob(params.p_init[i]);
      next = m;
    }
    for (const auto& it : h.items) {
      if (it.exercise >= q.num_exercises()) {
        throw InvalidArgument("log references exercise " +
                              std::to_string(it.exercise) + " out of range");
      }
      if (q.contains(it.exercise, c)) {
        seq.push_back({gated ? prerequisite_gate(m, c, prereqs) : 1.0,
                       it.correct});
      }
      if (gated) {
        update_into(m, it.exercise, it.correct, params, q, prereqs, next);
        m = next;
      }
    }
    if (!seq.empty()) seqs.push_back(std::move(seq));
  }
  return seqs;
}

// Grid indices: value = 0.05 * (index + 1).
constexpr int kRateSteps = 19;   // 0.05 .. 0.95
constexpr int kNoiseSteps = 8;   // 0.05 .. 0.40
double grid_value(int index) { return 0.05 * (index + 1); }

struct Candidate {
  std::array<int, 4> idx;  // init, learn, guess, slip
  double ll;
};

// Higher likelihood, then smaller guess + slip, then lexicographic order.
bool better(const Candidate& a, const Candidate& b) {
  const double tol = 1e-9 * std::max(1.0, std::abs(b.ll));
  if (a.ll > b.ll + tol) return true;
  if (a.ll < b.ll - tol) return false;
  const int noise_a = a.idx[2] + a.idx[3];
  const int noise_b = b.idx[2] + b.idx[3];
  if (noise_a != noise_b) return noise_a < noise_b;
  return a.idx < b.idx;
}

Candidate search_concept(const ConceptSequences& seqs) {
  auto evaluate = [&](const std::array<int, 4>& idx) {
    return Candidate{idx, concept_log_likelihood(
                              seqs, grid_value(idx[0]), grid_value(idx[1]),
                              grid_value(idx[2]), grid_value(idx[3]))};
  };

  // Coarse start, then coordinate sweeps until no coordinate improves.
  std::optional<Candidate> best;
  for (int i : {1, 5, 9, 13, 17}) {
    for (int l : {1, 5, 9, 13, 17}) {
      for (int g : {0, 3, 6}) {
        for (int s : {0, 3, 6}) {
          Candidate c = evaluate({i, l, g, s});
          if (!best || better(c, *best)) best = c;
        }
      }
    }
  }
  const std::array<int, 4> steps{kRateSteps, kRateSteps, kNoiseSteps,
                                 kNoiseSteps};
  for (bool changed = true; changed;) {
    changed = false;
    for (int coord = 0; coord < 4; ++coord) {
      for (int v = 0; v < steps[coord]; ++v) {
        if (v == best->idx[coord]) continue;
        auto idx = best->idx;
        idx[coord] = v;
        Candidate c = evaluate(idx);
        if (better(c, *best)) {
          best = c;
          changed = true;
        }
      }
    }
  }
  return *best;
}

}  // namespace

double bkt_log_likelihood(std::span<const History> logs, const QMatrix& q,
                          const BktParams& params,
                          const PrerequisiteGraph& prereqs) {
  params.validate();
  double ll = 0.0;
  for (std::size_t c = 0; c < q.num_concepts(); ++c) {
    const auto seqs = collect_sequences(logs, q, params, prereqs,
                                        static_cast<ConceptId>(c));
    ll += concept_log_likelihood(seqs, params.p_init[c], params.p_learn[c],
                                 params.p_guess[c], params.p_slip[c]);
  }
  return ll;
}

BktParams fit_bkt(std::span<const History> logs, const QMatrix& q) {
  return fit_bkt(logs, q, PrerequisiteGraph::flat(q.num_concepts()));
}

BktParams fit_bkt(std::span<const History> logs, const QMatrix& q,
                  const PrerequisiteGraph& prereqs) {
  if (logs.empty()) throw InvalidArgument("fit_bkt needs a non-empty log set");
  if (prereqs.num_concepts() != q.num_concepts()) {
    throw InvalidArgument("prerequisite graph does not match q-matrix");
  }
  BktParams params = BktParams::defaults(q.num_concepts());
  for (ConceptId c : prereqs.topological_order()) {
    const auto seqs = collect_sequences(logs, q, params, prereqs, c);
    if (seqs.empty()) continue;
    const Candidate best = search_concept(seqs);
    params.p_init[c] = grid_value(best.idx[0]);
    params.p_learn[c] = grid_value(best.idx[1]);
    params.p_guess[c] = grid_value(best.idx[2]);
    params.p_slip[c] = grid_value(best.idx[3]);
  }
  return params;
}

}  // namespace unier
