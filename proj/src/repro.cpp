#include "unier/repro.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "unier/data.hpp"
#include "unier/error.hpp"
#include "unier/harness.hpp"
#include "unier/iler.hpp"
#include "unier/metrics.hpp"
#include "unier/pler.hpp"
#include "unier/random.hpp"
#include "unier/report.hpp"
#include "unier/search.hpp"
#include "unier/simulator.hpp"

namespace unier::repro {

namespace {

using Clock = std::chrono::steady_clock;

CriterionResult make_result(int id, std::string title) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

// ---------------------------------------------------------------------------
// Reference knowledge model, written from the model definition. It shares no
// code with the simulator; instances are generated here first and converted
// to library types afterwards.

struct RefModel {
  std::size_t nc = 0;
  std::vector<std::vector<std::size_t>> concepts;  // per exercise
  std::vector<std::vector<std::size_t>> prereqs;   // per concept
  std::vector<double> init, learn, guess, slip;
};

double clampp(double p) { return std::min(0.999, std::max(0.001, p)); }

double ref_predict(const RefModel& r, const std::vector<double>& m, std::size_t e) {
  double mm = 0, gg = 0, ss = 0;
  for (std::size_t c : r.concepts[e]) {
    mm += m[c];
    gg += clampp(r.guess[c]);
    ss += clampp(r.slip[c]);
  }
  const double n = static_cast<double>(r.concepts[e].size());
  mm /= n;
  gg /= n;
  ss /= n;
  return mm * (1 - ss) + (1 - mm) * gg;
}

std::vector<double> ref_update(const RefModel& r, const std::vector<double>& m,
                               std::size_t e, bool obs) {
  std::vector<double> out = m;
  for (std::size_t c : r.concepts[e]) {
    const double g = clampp(r.guess[c]), s = clampp(r.slip[c]), l = clampp(r.learn[c]);
    const double a = obs ? m[c] * (1 - s) : m[c] * s;
    const double b = obs ? (1 - m[c]) * g : (1 - m[c]) * (1 - g);
    const double post = a / (a + b);
    double gate = 1.0;
    if (!r.prereqs[c].empty()) {
      gate = 0.0;
      for (std::size_t p : r.prereqs[c]) gate += m[p];
      gate /= static_cast<double>(r.prereqs[c].size());
    }
    out[c] = post + (1 - post) * l * gate;
  }
  return out;
}

std::vector<double> ref_expected(const RefModel& r, const std::vector<double>& m,
                                 std::size_t e) {
  const double p = ref_predict(r, m, e);
  const auto hit = ref_update(r, m, e, true);
  const auto miss = ref_update(r, m, e, false);
  std::vector<double> out = m;
  for (std::size_t c : r.concepts[e]) out[c] = p * hit[c] + (1 - p) * miss[c];
  return out;
}

std::vector<double> ref_prior(const RefModel& r) {
  std::vector<double> m(r.nc);
  for (std::size_t c = 0; c < r.nc; ++c) m[c] = clampp(r.init[c]);
  return m;
}

std::vector<double> ref_estimate(const RefModel& r, const History& h) {
  auto m = ref_prior(r);
  for (const auto& it : h.items) m = ref_update(r, m, it.exercise, it.correct);
  return m;
}

double ref_wcg(const RefModel& r, const std::vector<double>& m0,
               const std::vector<std::size_t>& path, const std::vector<double>& w) {
  auto m = m0;
  for (std::size_t e : path) m = ref_expected(r, m, e);
  double g = 0;
  for (std::size_t c = 0; c < r.nc; ++c) g += w[c] * (m[c] - m0[c]);
  return g;
}

std::vector<double> ref_gpp_weights(const std::vector<double>& m, double threshold) {
  std::vector<double> w(m.size(), 0.0);
  std::size_t n = 0;
  for (double x : m) n += x < threshold;
  if (n == 0) return w;
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (m[c] < threshold) w[c] = 1.0 / static_cast<double>(n);
  }
  return w;
}

Estimator to_estimator(const RefModel& r) {
  std::vector<IncidencePair> pairs;
  for (std::size_t e = 0; e < r.concepts.size(); ++e) {
    for (std::size_t c : r.concepts[e]) {
      pairs.emplace_back(static_cast<ExerciseId>(e), static_cast<ConceptId>(c));
    }
  }
  std::vector<std::pair<ConceptId, ConceptId>> edges;
  for (std::size_t c = 0; c < r.nc; ++c) {
    for (std::size_t p : r.prereqs[c]) {
      edges.emplace_back(static_cast<ConceptId>(p), static_cast<ConceptId>(c));
    }
  }
  BktParams params{r.init, r.learn, r.guess, r.slip};
  return Estimator(QMatrix::build(pairs, r.concepts.size(), r.nc), std::move(params),
                   PrerequisiteGraph(r.nc, edges));
}

double draw(Rng& rng, double lo, double hi) { return uniform_real(rng, lo, hi); }
std::size_t draw_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

// Random parameters for nc concepts.
void fill_params(RefModel& r, Rng& rng) {
  r.init.resize(r.nc);
  r.learn.resize(r.nc);
  r.guess.resize(r.nc);
  r.slip.resize(r.nc);
  for (std::size_t c = 0; c < r.nc; ++c) {
    r.init[c] = draw(rng, 0.01, 0.99);
    r.learn[c] = draw(rng, 0.01, 0.99);
    r.guess[c] = draw(rng, 0.01, 0.4);
    r.slip[c] = draw(rng, 0.01, 0.4);
  }
}

// Flat graph, every exercise on one concept.
RefModel random_flat_single(Rng& rng, std::size_t max_c, std::size_t max_e) {
  RefModel r;
  r.nc = draw_int(rng, 1, max_c);
  const std::size_t ne = draw_int(rng, 1, max_e);
  r.concepts.resize(ne);
  for (auto& row : r.concepts) row = {uniform_index(rng, r.nc)};
  r.prereqs.assign(r.nc, {});
  fill_params(r, rng);
  return r;
}

// Multi-concept exercises over a random DAG (edges from lower to higher ids).
RefModel random_general(Rng& rng, std::size_t max_c, std::size_t max_e) {
  RefModel r;
  r.nc = draw_int(rng, 1, max_c);
  const std::size_t ne = draw_int(rng, 1, max_e);
  r.concepts.resize(ne);
  for (auto& row : r.concepts) {
    const std::size_t k = draw_int(rng, 1, std::min<std::size_t>(3, r.nc));
    row = sample_without_replacement(r.nc, k, rng);
  }
  r.prereqs.assign(r.nc, {});
  for (std::size_t c = 1; c < r.nc; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      if (bernoulli(rng, 0.3)) r.prereqs[c].push_back(p);
    }
  }
  fill_params(r, rng);
  return r;
}

History random_history(Rng& rng, std::size_t ne, std::size_t max_len) {
  History h;
  const std::size_t n = draw_int(rng, 0, max_len);
  for (std::size_t i = 0; i < n; ++i) {
    h.append(static_cast<ExerciseId>(uniform_index(rng, ne)), bernoulli(rng, 0.5));
  }
  return h;
}

std::vector<double> random_weights(Rng& rng, std::size_t nc) {
  std::vector<double> w(nc);
  double s = 0;
  for (auto& x : w) {
    x = bernoulli(rng, 0.3) ? 0.0 : draw(rng, 0.0, 1.0);
    s += x;
  }
  if (s == 0) return w;
  for (auto& x : w) x /= s;
  return w;
}

LearningPath to_path(const std::vector<std::size_t>& p) {
  LearningPath out;
  for (std::size_t e : p) out.steps.push_back(static_cast<ExerciseId>(e));
  return out;
}

std::vector<std::size_t> from_path(const LearningPath& p) {
  return {p.steps.begin(), p.steps.end()};
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. WCG closed form on flat single-concept instances.

CriterionResult closed_form() {
  CriterionResult res = make_result(1, "closed-form WCG oracle (1000 flat instances, tol 1e-9)");
  res.limit_seconds = 5;
  double worst = 0.0, worst_est = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(1, i));
    RefModel r = random_flat_single(rng, 6, 10);
    const Estimator est = to_estimator(r);
    const History h = random_history(rng, r.concepts.size(), 8);
    const auto m0 = ref_estimate(r, h);
    std::vector<double> w;
    const int kind = static_cast<int>(uniform_index(rng, 3));
    if (kind == 0) {
      w = ref_gpp_weights(m0, 0.5);
    } else if (kind == 1) {
      w.assign(r.nc, 1.0 / static_cast<double>(r.nc));
    } else {
      w = random_weights(rng, r.nc);
    }
    std::vector<std::size_t> path(draw_int(rng, 0, 10));
    for (auto& e : path) e = uniform_index(rng, r.concepts.size());
    std::vector<std::size_t> n(r.nc, 0);
    for (std::size_t e : path) ++n[r.concepts[e][0]];
    double closed = 0;
    for (std::size_t c = 0; c < r.nc; ++c) {
      closed += w[c] * (1 - m0[c]) * (1 - std::pow(1 - clampp(r.learn[c]), static_cast<double>(n[c])));
    }
    const double got = wcg(est, h, to_path(path), WeightVector(w), ExpectedMode{});
    worst = std::max(worst, std::fabs(got - closed));
    const auto lib_m0 = est.estimate(h);
    for (std::size_t c = 0; c < r.nc; ++c) {
      worst_est = std::max(worst_est, std::fabs(lib_m0[c] - m0[c]));
    }
  }
  res.passed = worst <= 1e-9 && worst_est <= 1e-12;
  res.detail = fmt2("max |wcg - closed form| = %.3g, max |estimate - reference| = %.3g", worst,
                    worst_est);
  return res;
}

// ---------------------------------------------------------------------------
// 2. greedy_topk against exhaustive arg-max of gap scores.

CriterionResult greedy_equivalence() {
  CriterionResult res = make_result(2, "greedy_topk equals exhaustive gap arg-max (100 instances)");
  res.limit_seconds = 5;
  std::size_t mismatches = 0, enumerated = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng(derive_seed(2, i));
    const std::size_t nc = draw_int(rng, 1, 8);
    const std::size_t ne = draw_int(rng, 1, 50);
    std::vector<std::vector<std::size_t>> rows(ne);
    std::vector<IncidencePair> pairs;
    for (std::size_t e = 0; e < ne; ++e) {
      rows[e] = sample_without_replacement(nc, draw_int(rng, 1, nc), rng);
      for (std::size_t c : rows[e]) pairs.emplace_back(e, c);
    }
    // Quantised mastery on half the instances so ties occur.
    const bool quantised = i % 2 == 0;
    std::vector<double> m(nc);
    for (auto& x : m) {
      x = quantised ? static_cast<double>(uniform_index(rng, 5)) * 0.25 : uniform01(rng);
    }
    const std::size_t k = draw_int(rng, 1, std::min<std::size_t>(10, ne));
    std::vector<double> gap(ne, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t c : rows[e]) gap[e] += 1 - m[c];
    }
    // e is selected iff fewer than k exercises beat it.
    std::vector<ExerciseId> expect;
    for (std::size_t e = 0; e < ne; ++e) {
      std::size_t beaten_by = 0;
      for (std::size_t f = 0; f < ne; ++f) {
        if (gap[f] > gap[e] || (gap[f] == gap[e] && f < e)) ++beaten_by;
      }
      if (beaten_by < k) expect.push_back(static_cast<ExerciseId>(e));
    }
    // Full subset enumeration where it is affordable.
    if (ne <= 16) {
      ++enumerated;
      double best = -1;
      std::vector<ExerciseId> best_set;
      for (std::uint32_t mask = 0; mask < (1u << ne); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
        double s = 0;
        std::vector<ExerciseId> set;
        for (std::size_t e = 0; e < ne; ++e) {
          if (mask & (1u << e)) {
            s += gap[e];
            set.push_back(static_cast<ExerciseId>(e));
          }
        }
        if (s > best + 1e-12 || (std::fabs(s - best) <= 1e-12 && set < best_set)) {
          best = s;
          best_set = set;
        }
      }
      if (best_set != expect) ++mismatches;
    }
    const auto got = greedy_topk(QMatrix::build(pairs, ne, nc), MasteryVector(m), k).ids();
    if (got != expect) ++mismatches;
  }
  res.passed = mismatches == 0;
  res.detail = std::to_string(mismatches) + " mismatches; " + std::to_string(enumerated) +
               " instances also checked by full subset enumeration";
  return res;
}

// ---------------------------------------------------------------------------
// 3. Submodular guarantee for the diverse re-ranker.

struct RefDiversity {
  std::size_t coverage = 0;
  double gap_sum = 0;
};

RefDiversity ref_diversity(const std::vector<std::size_t>& subset,
                           const std::vector<std::vector<std::size_t>>& rows,
                           const std::vector<double>& gap, std::size_t nc) {
  std::vector<bool> seen(nc, false);
  RefDiversity d;
  for (std::size_t e : subset) {
    d.gap_sum += gap[e];
    for (std::size_t c : rows[e]) {
      if (!seen[c]) {
        seen[c] = true;
        ++d.coverage;
      }
    }
  }
  return d;
}

CriterionResult submodular() {
  CriterionResult res = make_result(3, "diverse re-rank coverage >= (1-1/e) exact (200 instances)");
  res.limit_seconds = 30;
  std::size_t bound_violations = 0, exact_mismatches = 0, outside_pool = 0;
  double worst_ratio = 1.0;
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng(derive_seed(3, i));
    const std::size_t k = draw_int(rng, 1, 6);
    const std::size_t pool = draw_int(rng, k + 1, 20);
    const std::size_t ne = draw_int(rng, pool, 30);
    const std::size_t nc = draw_int(rng, 2, 12);
    std::vector<std::vector<std::size_t>> rows(ne);
    std::vector<IncidencePair> pairs;
    for (std::size_t e = 0; e < ne; ++e) {
      rows[e] = sample_without_replacement(nc, draw_int(rng, 1, std::min<std::size_t>(3, nc)), rng);
      for (std::size_t c : rows[e]) pairs.emplace_back(e, c);
    }
    std::vector<double> m(nc);
    for (auto& x : m) x = uniform01(rng);
    std::vector<double> gap(ne, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t c : rows[e]) gap[e] += 1 - m[c];
    }
    std::vector<std::size_t> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gap[a] > gap[b]; });
    const std::vector<std::size_t> cand(order.begin(), order.begin() + static_cast<long>(pool));

    // Enumerate every k-subset of the pool.
    RefDiversity best;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::vector<std::size_t> subset;
      for (std::size_t j : idx) subset.push_back(cand[j]);
      const auto d = ref_diversity(subset, rows, gap, nc);
      if (d.coverage > best.coverage ||
          (d.coverage == best.coverage && d.gap_sum > best.gap_sum)) {
        best = d;
      }
      std::size_t j = k;
      while (j > 0 && idx[j - 1] == pool - k + (j - 1)) --j;
      if (j == 0) break;
      ++idx[j - 1];
      for (std::size_t t = j; t < k; ++t) idx[t] = idx[t - 1] + 1;
    }

    const QMatrix q = QMatrix::build(pairs, ne, nc);
    const IlerConfig cfg{k, pool};
    const auto greedy = rerank_diverse(q, MasteryVector(m), cfg).ids();
    const auto exact = exact_rerank(q, MasteryVector(m), cfg).ids();
    const auto dg = ref_diversity({greedy.begin(), greedy.end()}, rows, gap, nc);
    const auto de = ref_diversity({exact.begin(), exact.end()}, rows, gap, nc);
    if (de.coverage != best.coverage || std::fabs(de.gap_sum - best.gap_sum) > 1e-9 ||
        exact.size() != k) {
      ++exact_mismatches;
    }
    for (ExerciseId e : greedy) {
      if (std::find(cand.begin(), cand.end(), e) == cand.end()) ++outside_pool;
    }
    const double ratio = static_cast<double>(dg.coverage) / static_cast<double>(best.coverage);
    worst_ratio = std::min(worst_ratio, ratio);
    if (static_cast<double>(dg.coverage) < bound * static_cast<double>(best.coverage)) {
      ++bound_violations;
    }
  }
  res.passed = bound_violations == 0 && exact_mismatches == 0 && outside_pool == 0;
  res.detail = "worst greedy/exact coverage " + fmt("%.4f", worst_ratio) + " (bound " +
               fmt("%.4f", bound) + "), " + std::to_string(exact_mismatches) +
               " exact mismatches vs enumeration, " + std::to_string(outside_pool) +
               " picks outside the pool";
  return res;
}

// ---------------------------------------------------------------------------
// 4. chain5: trained value agent and beam planner against exhaustive OPT.

RefModel chain5_model() {
  RefModel r;
  r.nc = 5;
  r.concepts.resize(10);
  for (std::size_t e = 0; e < 10; ++e) r.concepts[e] = {e % 5};
  r.prereqs.assign(5, {});
  for (std::size_t c = 1; c < 5; ++c) r.prereqs[c] = {c - 1};
  r.init = {0.6, 0.3, 0.2, 0.1, 0.1};
  r.learn.assign(5, 0.3);
  r.guess.assign(5, 0.2);
  r.slip.assign(5, 0.1);
  return r;
}

CriterionResult chain5() {
  CriterionResult res = make_result(4, "chain5: dqn and beam(8) reach >= 0.90 OPT, seeds 0..4");
  res.limit_seconds = 60;
  const RefModel r = chain5_model();
  const Estimator est = to_estimator(r);
  const auto m0 = ref_prior(r);
  const auto w = ref_gpp_weights(m0, 0.5);
  const std::size_t budget = 5;

  double opt = -1;
  std::vector<std::size_t> best_path;
  std::vector<std::size_t> path(budget, 0);
  for (std::size_t code = 0; code < 100000; ++code) {
    std::size_t x = code;
    for (std::size_t i = budget; i-- > 0;) {
      path[i] = x % 10;
      x /= 10;
    }
    const double v = ref_wcg(r, m0, path, w);
    if (v > opt) {
      opt = v;
      best_path = path;
    }
  }

  EnvState start;
  start.mastery = MasteryVector(m0);
  start.weights = WeightVector(w);
  start.budget = budget;
  const EpisodeFactory factory = [&](Rng&) { return start; };

  const auto beam = from_path(beam_plan_from(est, start, 8));
  const double beam_ratio = ref_wcg(r, m0, beam, w) / opt;
  bool ok = beam.size() == budget && beam_ratio >= 0.9;
  double worst = beam_ratio;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LinearQ agent = dqn_train(factory, LinearQ{}, est, 2000, seed);
    const auto p = from_path(agent_recommend(agent, start, est));
    const double ratio = ref_wcg(r, m0, p, w) / opt;
    ok = ok && p.size() == budget && ratio >= 0.9;
    worst = std::min(worst, ratio);
    per_seed += (seed ? " " : "") + fmt("%.3f", ratio);
  }
  res.passed = ok;
  std::string opt_path;
  for (std::size_t e : best_path) opt_path += (opt_path.empty() ? "e" : " e") + std::to_string(e);
  res.detail = "OPT " + fmt("%.5f", opt) + " (" + opt_path + "); beam " + fmt("%.3f", beam_ratio) +
               " OPT; dqn per seed " + per_seed + " OPT";
  return res;
}

// ---------------------------------------------------------------------------
// 5 and 6. Population experiments through the harness.

ExperimentConfig population_config() {
  ExperimentConfig cfg;
  cfg.dataset = SynthConfig{};
  cfg.estimator = EstimatorMode::Fitted;
  cfg.tasks.tga = false;
  cfg.tasks.gpp = true;
  cfg.budget = 10;
  cfg.k = 10;
  cfg.seeds = {0, 1, 2, 3, 4};
  MethodSpec greedy;
  greedy.name = "greedy";
  greedy.kind = MethodKind::Greedy;
  MethodSpec dqn;
  dqn.name = "dqn";
  dqn.kind = MethodKind::Dqn;
  dqn.params = {{"episodes", 2000}};
  cfg.methods = {greedy, dqn};
  return cfg;
}

const ReportRow& find_row(const std::vector<ReportRow>& rows, const std::string& method,
                          const std::string& variant) {
  for (const auto& r : rows) {
    if (r.method == method && r.variant == variant) return r;
  }
  throw Error("missing row " + method + "/" + variant);
}

std::string join3(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4f", x);
  return s;
}

CriterionResult population() {
  CriterionResult res = make_result(5, "population: dqn GPP@10 > greedy GPP@10 for all 5 seeds");
  res.limit_seconds = 300;
  const auto rows = run_experiment(population_config());
  const auto& g = find_row(rows, "greedy", "clean");
  const auto& d = find_row(rows, "dqn", "clean");
  bool ok = g.status == "ok" && d.status == "ok" && g.per_seed.size() == 5 &&
            d.per_seed.size() == 5;
  std::size_t wins = 0;
  for (std::size_t i = 0; ok && i < 5; ++i) wins += d.per_seed[i] > g.per_seed[i];
  res.passed = ok && wins == 5;
  res.detail = "dqn " + join3(d.per_seed) + " | greedy " + join3(g.per_seed) + " (" +
               std::to_string(wins) + "/5 seeds)";
  return res;
}

CriterionResult noise_robustness() {
  CriterionResult res = make_result(6, "noise 0.20: dqn degrades less than greedy in >= 4 of 5 seeds");
  res.limit_seconds = 600;
  ExperimentConfig cfg = population_config();
  VariantSpec noisy;
  noisy.name = "noise20";
  noisy.perturbations = {PerturbationSpec{PerturbationKind::Noise, 0.20, 0, false}};
  cfg.variants = {VariantSpec{}, noisy};
  const auto rows = run_experiment(cfg);
  const auto& gc = find_row(rows, "greedy", "clean");
  const auto& gn = find_row(rows, "greedy", "noise20");
  const auto& dc = find_row(rows, "dqn", "clean");
  const auto& dn = find_row(rows, "dqn", "noise20");
  for (const auto* r : {&gc, &gn, &dc, &dn}) {
    if (r->status != "ok" || r->per_seed.size() != 5) {
      res.detail = r->method + "/" + r->variant + ": " + r->status;
      return res;
    }
  }
  auto rel = [](double clean, double noisy) {
    if (clean == 0.0) return noisy < 0.0 ? 1.0 : 0.0;
    return (clean - noisy) / std::fabs(clean);
  };
  std::size_t wins = 0;
  std::vector<double> rd, rg;
  for (std::size_t i = 0; i < 5; ++i) {
    rd.push_back(rel(dc.per_seed[i], dn.per_seed[i]));
    rg.push_back(rel(gc.per_seed[i], gn.per_seed[i]));
    wins += rd.back() < rg.back();
  }
  res.passed = wins >= 4;
  res.detail = "relative degradation dqn " + join3(rd) + " | greedy " + join3(rg) + " (" +
               std::to_string(wins) + "/5 seeds)";
  return res;
}

// ---------------------------------------------------------------------------
// 7. Perturbation exactness and determinism.

// floor(num * len / den) in integers; ratios below are num/den exactly.
std::size_t exact_floor(std::size_t num, std::size_t den, std::size_t len) {
  return num * len / den;
}

std::string bundle_bytes(const Dataset& d, const std::filesystem::path& dir) {
  write_bundle(d, dir);
  std::string all;
  for (const char* f : {"logs.csv", "qmatrix.csv", "prereqs.csv", "idmap.json"}) {
    std::ifstream in(dir / f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    all += ss.str();
  }
  return all;
}

bool is_subsequence(const std::vector<Interaction>& sub, const std::vector<Interaction>& full) {
  std::size_t j = 0;
  for (const auto& it : full) {
    if (j < sub.size() && sub[j].exercise == it.exercise && sub[j].correct == it.correct) ++j;
  }
  return j == sub.size();
}

CriterionResult perturbations() {
  CriterionResult res = make_result(7, "perturbation exactness (sparsity, cold-start, noise) and determinism");
  SynthConfig sc;
  sc.students = 120;
  sc.log_length = 60;
  Dataset d = synth_generate(sc).dataset;
  // Uneven lengths.
  Rng rng(7);
  for (auto& h : d.logs) h.items.resize(draw_int(rng, 0, h.items.size()));

  const auto tmp = std::filesystem::temp_directory_path() /
                   ("unier-repro-" + std::to_string(::getpid()));
  std::size_t failures = 0;
  std::string first_failure;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first_failure = what;
  };

  for (std::size_t tenths : {2, 4, 8}) {
    const double r = static_cast<double>(tenths) / 10.0;
    const Dataset a = perturb_sparsity(d, r, 11);
    const Dataset b = perturb_sparsity(d, r, 11);
    for (std::size_t s = 0; s < d.logs.size(); ++s) {
      const auto& h = a.logs[s];
      if (h.size() != exact_floor(tenths, 10, d.logs[s].size())) fail("sparsity length");
      if (!is_subsequence(h.items, d.logs[s].items)) fail("sparsity order");
    }
    if (bundle_bytes(a, tmp / "a") != bundle_bytes(b, tmp / "b")) fail("sparsity bytes");
  }
  {
    const Dataset a = perturb_coldstart(d, 5);
    const Dataset b = perturb_coldstart(d, 5);
    for (std::size_t s = 0; s < d.logs.size(); ++s) {
      const auto& h = a.logs[s].items;
      const auto& o = d.logs[s].items;
      if (h.size() != std::min<std::size_t>(5, o.size())) fail("cold-start length");
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i].exercise != o[i].exercise || h[i].correct != o[i].correct) fail("cold-start prefix");
      }
    }
    if (bundle_bytes(a, tmp / "a") != bundle_bytes(b, tmp / "b")) fail("cold-start bytes");
  }
  for (std::size_t hundredths : {5, 10, 15, 20}) {
    const double r = static_cast<double>(hundredths) / 100.0;
    const Dataset a = perturb_noise(d, r, 13);
    const Dataset b = perturb_noise(d, r, 13);
    for (std::size_t s = 0; s < d.logs.size(); ++s) {
      const auto& h = a.logs[s].items;
      const auto& o = d.logs[s].items;
      if (h.size() != o.size()) {
        fail("noise length");
        continue;
      }
      std::size_t flipped = 0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i].exercise != o[i].exercise) fail("noise exercise");
        flipped += h[i].correct != o[i].correct;
      }
      if (flipped != exact_floor(hundredths, 100, o.size())) fail("noise count");
    }
    if (bundle_bytes(a, tmp / "a") != bundle_bytes(b, tmp / "b")) fail("noise bytes");
  }
  std::error_code ec;
  std::filesystem::remove_all(tmp, ec);
  res.passed = failures == 0;
  res.detail = failures == 0 ? "120 students, lengths 0..60, all levels exact and byte-identical"
                             : std::to_string(failures) + " failures, first: " + first_failure;
  return res;
}

// ---------------------------------------------------------------------------
// 8. Gradient checks by central finite differences.

double rel_error(const Features& a, const Features& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  if (scale < 1e-10) return 0.0;
  return std::sqrt(diff) / scale;
}

EnvState random_state(Rng& rng, const RefModel& r) {
  std::vector<double> m(r.nc);
  for (auto& x : m) x = uniform01(rng);
  EnvState s;
  s.mastery = MasteryVector(m);
  std::vector<double> w = random_weights(rng, r.nc);
  if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) {
    w.assign(r.nc, 1.0 / static_cast<double>(r.nc));
  }
  s.weights = WeightVector(w);
  s.budget = draw_int(rng, 1, 10);
  s.step = uniform_index(rng, s.budget);
  return s;
}

Features random_features(Rng& rng, double scale) {
  Features f{};
  for (auto& x : f) x = draw(rng, -scale, scale);
  return f;
}

CriterionResult gradients() {
  CriterionResult res = make_result(8, "actor and TD gradients match central differences (rel < 1e-5)");
  res.limit_seconds = 5;
  const double h = 1e-6;
  double worst_actor = 0, worst_critic = 0, worst_value = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng(derive_seed(8, i));
    const RefModel r = random_general(rng, 6, 8);
    const Estimator est = to_estimator(r);
    const EnvState s = random_state(rng, r);
    const auto a = static_cast<ExerciseId>(uniform_index(rng, r.concepts.size()));

    SoftmaxPolicy pol;
    pol.actor = random_features(rng, 2.0);
    const Features g = log_policy_gradient(pol, s, a, est);
    Features fd{};
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      SoftmaxPolicy hi = pol, lo = pol;
      hi.actor[j] += h;
      lo.actor[j] -= h;
      fd[j] = (std::log(policy_probabilities(hi, s, est)[a]) -
               std::log(policy_probabilities(lo, s, est)[a])) /
              (2 * h);
    }
    worst_actor = std::max(worst_actor, rel_error(g, fd));

    // Squared TD error with the bootstrapped target held fixed.
    auto check_td = [&](const Features& phi, double& worst) {
      const Features w = random_features(rng, 1.0);
      const double target = draw(rng, -1.0, 1.0);
      auto loss = [&](const Features& ww) {
        double v = 0;
        for (std::size_t j = 0; j < kFeatureDim; ++j) v += ww[j] * phi[j];
        return 0.5 * (target - v) * (target - v);
      };
      Features num{};
      for (std::size_t j = 0; j < kFeatureDim; ++j) {
        Features hi = w, lo = w;
        hi[j] += h;
        lo[j] -= h;
        num[j] = (loss(hi) - loss(lo)) / (2 * h);
      }
      worst = std::max(worst, rel_error(td_semi_gradient(w, phi, target), num));
    };
    check_td(state_features(s), worst_critic);
    check_td(features(s, a, est), worst_value);
  }
  res.passed = worst_actor < 1e-5 && worst_critic < 1e-5 && worst_value < 1e-5;
  res.detail = "max rel err actor " + fmt("%.2e", worst_actor) + ", critic " +
               fmt("%.2e", worst_critic) + ", value " + fmt("%.2e", worst_value) +
               " over 50 states";
  return res;
}

// ---------------------------------------------------------------------------
// 9. Simulator properties.

CriterionResult simulator_props() {
  CriterionResult res = make_result(9, "simulator: martingale, unit bounds, sampled vs expected");
  double worst_mart = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(90, i));
    const RefModel r = random_flat_single(rng, 5, 8);
    const Estimator est = to_estimator(r);
    std::vector<double> m(r.nc);
    for (auto& x : m) x = uniform01(rng);
    const auto e = static_cast<ExerciseId>(uniform_index(rng, r.concepts.size()));
    const std::size_t c = r.concepts[e][0];
    const auto next = est.expected_step(MasteryVector(m), e);
    const double l = clampp(r.learn[c]);
    worst_mart = std::max(worst_mart, std::fabs(next[c] - (m[c] + (1 - m[c]) * l)));
  }

  std::size_t out_of_range = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(91, i));
    const RefModel r = random_general(rng, 6, 8);
    const Estimator est = to_estimator(r);
    std::vector<double> mv(r.nc);
    for (auto& x : mv) x = bernoulli(rng, 0.2) ? static_cast<double>(uniform_index(rng, 2)) : uniform01(rng);
    MasteryVector m(mv);
    const std::size_t steps = draw_int(rng, 1, 20);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto e = static_cast<ExerciseId>(uniform_index(rng, r.concepts.size()));
      m = bernoulli(rng, 0.5) ? est.update(m, e, bernoulli(rng, 0.5)) : est.expected_step(m, e);
      for (double x : m.values()) out_of_range += !(x >= 0.0 && x <= 1.0);
    }
  }

  double worst_mc = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng(derive_seed(92, i));
    const RefModel r = random_flat_single(rng, 4, 6);
    const Estimator est = to_estimator(r);
    const History h = random_history(rng, r.concepts.size(), 5);
    std::vector<std::size_t> path(draw_int(rng, 1, 5));
    for (auto& e : path) e = uniform_index(rng, r.concepts.size());
    const auto ex = simulate_path(est, h, to_path(path), ExpectedMode{}).final_mastery;
    const auto sa = simulate_path(est, h, to_path(path), SampledMode{10000, i}).final_mastery;
    for (std::size_t c = 0; c < r.nc; ++c) worst_mc = std::max(worst_mc, std::fabs(ex[c] - sa[c]));
  }
  res.passed = worst_mart <= 1e-12 && out_of_range == 0 && worst_mc <= 0.01;
  res.detail = "martingale max err " + fmt("%.2e", worst_mart) + "; " +
               std::to_string(out_of_range) + " out-of-range values over 10^4 sequences; " +
               "sampled(10000) max gap " + fmt("%.4f", worst_mc);
  return res;
}

// ---------------------------------------------------------------------------
// 10. Parameter recovery.

CriterionResult recovery() {
  CriterionResult res = make_result(10, "fit_bkt recovers single-concept generating params within 0.1");
  const BktParams truth{{0.2}, {0.3}, {0.2}, {0.1}};
  std::vector<IncidencePair> pairs = {{0, 0}, {1, 0}, {2, 0}};
  auto q = std::make_shared<const QMatrix>(QMatrix::build(pairs, 3, 1));
  auto g = std::make_shared<const PrerequisiteGraph>(PrerequisiteGraph::flat(1));
  std::vector<History> logs;
  for (std::size_t s = 0; s < 500; ++s) {
    GroundTruthStudent stu(MasteryVector({0.2}), truth, g, q, derive_seed(10, s));
    Rng pick(derive_seed(11, s));
    History h;
    h.student = static_cast<StudentId>(s);
    for (std::size_t t = 0; t < 50; ++t) {
      const auto e = static_cast<ExerciseId>(uniform_index(pick, 3));
      h.append(e, stu.respond(e));
    }
    logs.push_back(std::move(h));
  }
  // Truth is an initial mastery of 0.2 for the population; each student's
  // hidden start equals it, so the population prior matches.
  const BktParams fit = fit_bkt(logs, *q);
  const double di = std::fabs(fit.p_init[0] - 0.2), dl = std::fabs(fit.p_learn[0] - 0.3);
  const double dg = std::fabs(fit.p_guess[0] - 0.2), ds = std::fabs(fit.p_slip[0] - 0.1);
  res.passed = di <= 0.1 + 1e-12 && dl <= 0.1 + 1e-12 && dg <= 0.1 + 1e-12 && ds <= 0.1 + 1e-12;
  char buf[200];
  std::snprintf(buf, sizeof buf, "fitted init %.2f learn %.2f guess %.2f slip %.2f",
                fit.p_init[0], fit.p_learn[0], fit.p_guess[0], fit.p_slip[0]);
  res.detail = buf;
  return res;
}

// ---------------------------------------------------------------------------
// 11. Protocol fidelity.

ExperimentConfig protocol_config() {
  ExperimentConfig cfg;
  SynthConfig sc;
  sc.students = 60;
  sc.log_length = 20;
  cfg.dataset = sc;
  cfg.seeds = {0, 1};
  auto add = [&](const std::string& name, MethodKind kind, ParamSet p) {
    MethodSpec m;
    m.name = name;
    m.kind = kind;
    m.params = std::move(p);
    cfg.methods.push_back(std::move(m));
  };
  add("greedy", MethodKind::Greedy, {});
  add("diverse", MethodKind::Diverse, {{"pool_size", 12}});
  add("dqn", MethodKind::Dqn, {{"episodes", 200}});
  add("actor_critic", MethodKind::ActorCritic, {{"episodes", 200}});
  add("beam", MethodKind::Beam, {{"width", 3}});
  VariantSpec noisy;
  noisy.name = "noise10";
  noisy.perturbations = {PerturbationSpec{PerturbationKind::Noise, 0.10, 3, false}};
  cfg.variants = {VariantSpec{}, noisy};
  return cfg;
}

CriterionResult protocol() {
  CriterionResult res = make_result(11, "protocol: <= 20 search trials, byte-identical results, shared fingerprint");
  std::string problems;

  SearchSpace cont;
  cont.params = {ParamDomain{"x", {}, 0.0, 1.0}, ParamDomain{"y", {}, 1e-3, 1.0, true}};
  std::size_t calls = 0;
  const auto sr = random_search(cont, [&](const ParamSet& p) {
    ++calls;
    return -std::fabs(p.at("x") - 0.5);
  }, 5);
  if (calls > 20 || sr.trials.size() > 20) problems += " continuous search ran " + std::to_string(calls) + " trials;";
  SearchSpace disc;
  disc.params = {ParamDomain{"width", {1, 2, 3}}};
  std::size_t dcalls = 0;
  random_search(disc, [&](const ParamSet&) { return static_cast<double>(++dcalls); }, 5);
  if (dcalls != 3) problems += " size-3 space ran " + std::to_string(dcalls) + " trials;";

  const ExperimentConfig cfg = protocol_config();
  const auto a = results_csv(run_experiment(cfg));
  const auto rows = run_experiment(cfg);
  const auto b = results_csv(rows);
  if (a != b) problems += " results.csv differs between runs;";

  const Dataset base = load_dataset(cfg);
  const std::string clean_fp = make_estimator(cfg, base)->fingerprint();
  for (const auto& v : cfg.variants) {
    std::string fp;
    for (const auto& r : rows) {
      if (r.variant != v.name) continue;
      if (r.status != "ok") problems += " " + r.method + " failed;";
      if (r.estimator.empty()) problems += " empty fingerprint;";
      if (fp.empty()) fp = r.estimator;
      if (r.estimator != fp) problems += " fingerprints differ in " + v.name + ";";
    }
    if (v.name == "clean" && fp != clean_fp) problems += " clean fingerprint mismatch;";
  }
  res.passed = problems.empty();
  res.detail = problems.empty() ? std::to_string(calls) + " trials on a continuous space, " +
                                      std::to_string(dcalls) + " on a size-3 space; " +
                                      std::to_string(rows.size()) +
                                      " rows byte-identical across runs; fingerprint " + clean_fp
                                : problems;
  return res;
}

}  // namespace

const std::vector<Fixture>& fixtures() {
  static const std::vector<Fixture> all = {
      {"closed_form", "WCG against the closed form on flat instances", {1}},
      {"greedy", "greedy top-k against exhaustive arg-max", {2}},
      {"submodular", "diverse re-rank against exact enumeration", {3}},
      {"chain5", "5-concept chain: trained agent and beam against exhaustive OPT", {4}},
      {"population", "200-student chain population, dqn vs greedy", {5}},
      {"noise", "200-student population under 20% label noise", {6}},
      {"perturbation", "sparsity, cold-start and noise exactness", {7}},
      {"gradients", "finite-difference gradient checks", {8}},
      {"simulator", "simulator identities and bounds", {9}},
      {"recovery", "single-concept parameter recovery", {10}},
      {"protocol", "search budget, determinism and fingerprint sharing", {11}},
      {"all", "every criterion", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}},
  };
  return all;
}

CriterionResult run_criterion(int id) {
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = closed_form(); break;
      case 2: r = greedy_equivalence(); break;
      case 3: r = submodular(); break;
      case 4: r = chain5(); break;
      case 5: r = population(); break;
      case 6: r = noise_robustness(); break;
      case 7: r = perturbations(); break;
      case 8: r = gradients(); break;
      case 9: r = simulator_props(); break;
      case 10: r = recovery(); break;
      case 11: r = protocol(); break;
      default: throw InvalidArgument("no criterion " + std::to_string(id));
    }
  } catch (const InvalidArgument&) {
    throw;
  } catch (const std::exception& e) {
    r.id = id;
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (r.limit_seconds > 0 && r.seconds >= r.limit_seconds) {
    r.passed = false;
    r.detail += " (over the runtime limit)";
  }
  return r;
}

std::vector<CriterionResult> run_fixture(const std::string& name) {
  for (const auto& f : fixtures()) {
    if (f.name == name) {
      std::vector<CriterionResult> out;
      for (int id : f.criteria) out.push_back(run_criterion(id));
      return out;
    }
  }
  throw InvalidArgument("unknown fixture '" + name + "'");
}

std::string format_result(const CriterionResult& r) {
  std::string s = r.passed ? "[PASS] " : "[FAIL] ";
  s += std::to_string(r.id) + " " + r.title + " (" + fmt("%.2f s", r.seconds);
  if (r.limit_seconds > 0) s += ", limit " + fmt("%.0f s", r.limit_seconds);
  s += "): " + r.detail;
  return s;
}

}  // namespace unier::repro
