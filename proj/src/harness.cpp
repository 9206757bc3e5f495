#include "unier/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "unier/error.hpp"
#include "unier/iler.hpp"
#include "unier/profile.hpp"
#include "unier/random.hpp"
#include "unier/serialize.hpp"

namespace unier {

namespace fs = std::filesystem;

namespace {

// Stream tags so derived seeds for different purposes never collide.
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;   // "split"
constexpr std::uint64_t kTargetStream = 0x7467610000ULL;  // "tga"
constexpr std::uint64_t kTrainStream = 0x747261696eULL;   // "train"
constexpr std::uint64_t kSearchStream = 0x7365617263ULL;  // "searc"

// ---------------------------------------------------------------------------
// Configuration parsing

template <typename T>
T scalar(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw DataError("config: bad value for '" + where + "'");
  }
}

template <typename T>
T value_or(const YAML::Node& map, const std::string& key, T fallback) {
  const YAML::Node n = map[key];
  if (!n || n.IsNull()) return fallback;
  return scalar<T>(n, key);
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!map.IsMap()) throw DataError("config: '" + where + "' must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw DataError("config: unknown key '" + key + "' in " + where);
    }
  }
}

Range parse_range(const YAML::Node& n, Range fallback, const std::string& key) {
  if (!n) return fallback;
  if (!n.IsSequence() || n.size() != 2) {
    throw DataError("config: '" + key + "' must be a [lo, hi] pair");
  }
  return {scalar<double>(n[0], key), scalar<double>(n[1], key)};
}

SynthConfig parse_synth(const YAML::Node& n) {
  reject_unknown(n,
                 {"students", "concepts", "exercises", "chain_depth", "log_length", "seed",
                  "p_init", "p_learn", "p_guess", "p_slip"},
                 "dataset.synthetic");
  SynthConfig c;
  c.students = value_or<std::size_t>(n, "students", c.students);
  c.concepts = value_or<std::size_t>(n, "concepts", c.concepts);
  c.exercises = value_or<std::size_t>(n, "exercises", c.exercises);
  c.chain_depth = value_or<std::size_t>(n, "chain_depth", c.chain_depth);
  c.log_length = value_or<std::size_t>(n, "log_length", c.log_length);
  c.seed = value_or<std::uint64_t>(n, "seed", c.seed);
  c.p_init = parse_range(n["p_init"], c.p_init, "p_init");
  c.p_learn = parse_range(n["p_learn"], c.p_learn, "p_learn");
  c.p_guess = parse_range(n["p_guess"], c.p_guess, "p_guess");
  c.p_slip = parse_range(n["p_slip"], c.p_slip, "p_slip");
  return c;
}

ParamSet parse_params(const YAML::Node& n, const std::string& where) {
  ParamSet p;
  if (!n) return p;
  if (!n.IsMap()) throw DataError("config: '" + where + "' must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    p[key] = scalar<double>(kv.second, where + "." + key);
  }
  return p;
}

MethodSearch parse_search(const YAML::Node& n, const std::string& where) {
  reject_unknown(n, {"trials", "wall_clock_seconds", "task", "space"}, where);
  MethodSearch s;
  s.space.trial_budget = value_or<std::size_t>(n, "trials", s.space.trial_budget);
  s.space.wall_clock_seconds =
      value_or<double>(n, "wall_clock_seconds", s.space.wall_clock_seconds);
  s.task = value_or<std::string>(n, "task", s.task);
  const YAML::Node space = n["space"];
  if (!space || !space.IsMap() || space.size() == 0) {
    throw DataError("config: " + where + ".space must list at least one parameter");
  }
  for (const auto& kv : space) {
    ParamDomain d;
    d.name = kv.first.as<std::string>();
    const std::string key = where + ".space." + d.name;
    if (kv.second.IsSequence()) {
      for (const auto& v : kv.second) d.choices.push_back(scalar<double>(v, key));
      if (d.choices.empty()) throw DataError("config: " + key + " has no choices");
    } else {
      reject_unknown(kv.second, {"min", "max", "log", "integer"}, key);
      d.lo = scalar<double>(kv.second["min"], key + ".min");
      d.hi = scalar<double>(kv.second["max"], key + ".max");
      d.log_scale = value_or<bool>(kv.second, "log", false);
      d.integer = value_or<bool>(kv.second, "integer", false);
    }
    s.space.params.push_back(std::move(d));
  }
  return s;
}

PerturbationKind parse_perturbation_kind(const std::string& s) {
  if (s == "sparsity") return PerturbationKind::Sparsity;
  if (s == "coldstart") return PerturbationKind::ColdStart;
  if (s == "noise") return PerturbationKind::Noise;
  throw DataError("config: unknown perturbation kind '" + s + "'");
}

SimMode parse_sim_mode(const YAML::Node& n) {
  if (!n) return ExpectedMode{};
  if (n.IsScalar()) {
    const auto s = n.as<std::string>();
    if (s == "expected") return ExpectedMode{};
    if (s == "sampled") return SampledMode{100, 0};
    throw DataError("config: unknown sim_mode '" + s + "'");
  }
  reject_unknown(n, {"kind", "rollouts", "seed"}, "sim_mode");
  const auto kind = value_or<std::string>(n, "kind", "expected");
  if (kind == "expected") return ExpectedMode{};
  if (kind != "sampled") throw DataError("config: unknown sim_mode kind '" + kind + "'");
  return SampledMode{value_or<std::size_t>(n, "rollouts", 100),
                     value_or<std::uint64_t>(n, "seed", 0)};
}

// ---------------------------------------------------------------------------
// Recommenders

class GreedyRecommender : public Recommender {
 public:
  GreedyRecommender(std::size_t budget, bool exclude)
      : budget_(budget), exclude_(exclude) {}
  LearningPath recommend(const Estimator& est, const History& h,
                         const EnvState& start) const override {
    const auto excluded = attempted(h);
    return unify_output(greedy_topk(est.q(), start.mastery, budget_, excluded), budget_);
  }

 protected:
  std::vector<ExerciseId> attempted(const History& h) const {
    std::vector<ExerciseId> out;
    if (!exclude_) return out;
    for (const auto& it : h.items) out.push_back(it.exercise);
    return out;
  }
  std::size_t budget_;
  bool exclude_;
};

class DiverseRecommender : public GreedyRecommender {
 public:
  DiverseRecommender(std::size_t budget, bool exclude, std::size_t pool)
      : GreedyRecommender(budget, exclude), pool_(pool) {}
  LearningPath recommend(const Estimator& est, const History& h,
                         const EnvState& start) const override {
    const IlerConfig cfg{budget_, pool_};
    return unify_output(rerank_diverse(est.q(), start.mastery, cfg, attempted(h)), budget_);
  }

 private:
  std::size_t pool_;
};

class ValueAgentRecommender : public Recommender {
 public:
  ValueAgentRecommender(LinearQ agent, SimMode mode)
      : agent_(std::move(agent)), mode_(mode) {}
  LearningPath recommend(const Estimator& est, const History&,
                         const EnvState& start) const override {
    return agent_recommend(agent_, start, est, mode_);
  }
  nlohmann::json to_json() const override { return unier::to_json(agent_); }

 private:
  LinearQ agent_;
  SimMode mode_;
};

class PolicyAgentRecommender : public Recommender {
 public:
  PolicyAgentRecommender(SoftmaxPolicy policy, SimMode mode)
      : policy_(std::move(policy)), mode_(mode) {}
  LearningPath recommend(const Estimator& est, const History&,
                         const EnvState& start) const override {
    return agent_recommend(policy_, start, est, true, 0, mode_);
  }
  nlohmann::json to_json() const override { return unier::to_json(policy_); }

 private:
  SoftmaxPolicy policy_;
  SimMode mode_;
};

class BeamRecommender : public Recommender {
 public:
  explicit BeamRecommender(std::size_t width) : width_(width) {}
  LearningPath recommend(const Estimator& est, const History&,
                         const EnvState& start) const override {
    return beam_plan_from(est, start, width_);
  }

 private:
  std::size_t width_;
};

std::size_t as_count(const ParamSet& p, const std::string& key) {
  const double v = p.at(key);
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw InvalidArgument("hyperparameter '" + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

ParamSet resolve_params(const MethodSpec& spec, const ParamSet& overrides) {
  ParamSet p = default_params(spec.kind);
  for (const auto& [k, v] : overrides) {
    if (!p.count(k)) {
      throw InvalidArgument("method '" + spec.name + "' (" + to_string(spec.kind) +
                            ") has no hyperparameter '" + k + "'");
    }
    p[k] = v;
  }
  return p;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

TaskKind parse_task(const std::string& s) {
  if (s == "tga") return TaskKind::Tga;
  if (s == "gpp") return TaskKind::Gpp;
  throw InvalidArgument("unknown task '" + s + "' (expected tga or gpp)");
}

std::vector<TaskKind> enabled_tasks(const TaskSettings& t) {
  std::vector<TaskKind> out;
  if (t.tga) out.push_back(TaskKind::Tga);
  if (t.gpp) out.push_back(TaskKind::Gpp);
  return out;
}

bool seed_dependent(const VariantSpec& v) {
  return std::any_of(v.perturbations.begin(), v.perturbations.end(),
                     [](const PerturbationSpec& p) { return p.train_only; });
}

}  // namespace

// ---------------------------------------------------------------------------

MethodKind parse_method_kind(const std::string& s) {
  if (s == "greedy") return MethodKind::Greedy;
  if (s == "diverse") return MethodKind::Diverse;
  if (s == "dqn") return MethodKind::Dqn;
  if (s == "actor_critic") return MethodKind::ActorCritic;
  if (s == "beam") return MethodKind::Beam;
  throw InvalidArgument("unknown method type '" + s +
                        "' (expected greedy, diverse, dqn, actor_critic or beam)");
}

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Greedy:
      return "greedy";
    case MethodKind::Diverse:
      return "diverse";
    case MethodKind::Dqn:
      return "dqn";
    case MethodKind::ActorCritic:
      return "actor_critic";
    case MethodKind::Beam:
      return "beam";
  }
  return "unknown";
}

bool is_path_level(MethodKind kind) {
  return kind == MethodKind::Dqn || kind == MethodKind::ActorCritic ||
         kind == MethodKind::Beam;
}

std::string to_string(TaskKind t) { return t == TaskKind::Tga ? "TGA" : "GPP"; }

ParamSet default_params(MethodKind kind) {
  switch (kind) {
    case MethodKind::Greedy:
      return {{"exclude_attempted", 0}};
    case MethodKind::Diverse:
      return {{"exclude_attempted", 0}, {"pool_size", 20}};
    case MethodKind::Dqn: {
      const LinearQ d;
      return {{"episodes", 2000},
              {"alpha", d.alpha},
              {"gamma", d.gamma},
              {"epsilon_start", d.epsilon_start},
              {"epsilon_end", d.epsilon_end},
              {"decay_fraction", d.decay_fraction}};
    }
    case MethodKind::ActorCritic: {
      const SoftmaxPolicy d;
      return {{"episodes", 2000},
              {"actor_step", d.actor_step},
              {"critic_step", d.critic_step},
              {"gamma", d.gamma}};
    }
    case MethodKind::Beam:
      return {{"width", 8}};
  }
  return {};
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw InvalidArgument("experiment needs at least one method");
  if (!tasks.tga && !tasks.gpp) throw InvalidArgument("experiment needs at least one task");
  if (budget == 0) throw InvalidArgument("budget must be positive");
  if (k > budget) throw InvalidArgument("evaluation k exceeds the path budget");
  if (!(tasks.threshold > 0.0 && tasks.threshold < 1.0)) {
    throw InvalidArgument("GPP threshold must lie in (0, 1)");
  }
  if (tasks.max_targets == 0) throw InvalidArgument("TGA max_targets must be positive");
  if (seeds.empty()) throw InvalidArgument("experiment needs at least one seed");
  if (variants.empty()) throw InvalidArgument("experiment needs at least one variant");
  if (jobs == 0) throw InvalidArgument("jobs must be at least 1");
  if (const auto* s = std::get_if<SampledMode>(&mode); s && s->rollouts == 0) {
    throw InvalidArgument("sampled mode needs at least one rollout");
  }
  std::set<std::string> names;
  for (const auto& m : methods) {
    if (m.name.empty()) throw InvalidArgument("method without a name");
    if (!names.insert(m.name).second) {
      throw InvalidArgument("duplicate method name '" + m.name + "'");
    }
    resolve_params(m, m.params);
    if (m.search) {
      m.search->space.validate();
      parse_task(m.search->task);
      for (const auto& d : m.search->space.params) {
        if (!default_params(m.kind).count(d.name)) {
          throw InvalidArgument("method '" + m.name + "' cannot search unknown '" +
                                d.name + "'");
        }
      }
    }
  }
  std::set<std::string> vnames;
  for (const auto& v : variants) {
    if (!vnames.insert(v.name).second) {
      throw InvalidArgument("duplicate variant name '" + v.name + "'");
    }
  }
  if (const auto* synth = std::get_if<SynthConfig>(&dataset)) synth->validate();
}

const MethodSpec& ExperimentConfig::method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.name == name) return m;
  }
  throw InvalidArgument("no method named '" + name + "' in config");
}

ExperimentConfig parse_config(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (!root.IsMap()) throw DataError("config: top level must be a mapping");
  reject_unknown(root,
                 {"dataset", "estimator", "oracle_params", "methods", "tasks", "budget", "k",
                  "sim_mode", "variants", "seeds", "jobs", "profile"},
                 "config");
  ExperimentConfig cfg;
  try {
    if (const auto ds = root["dataset"]) {
      reject_unknown(ds, {"synthetic", "bundle"}, "dataset");
      if (ds["synthetic"] && ds["bundle"]) {
        throw DataError("config: dataset is either synthetic or bundle, not both");
      }
      if (ds["bundle"]) {
        fs::path p = scalar<std::string>(ds["bundle"], "dataset.bundle");
        cfg.dataset = p.is_relative() ? base_dir / p : p;
      } else if (ds["synthetic"]) {
        cfg.dataset = parse_synth(ds["synthetic"]);
      }
    }
    const auto est = value_or<std::string>(root, "estimator", "fitted");
    if (est == "fitted") {
      cfg.estimator = EstimatorMode::Fitted;
    } else if (est == "oracle") {
      cfg.estimator = EstimatorMode::Oracle;
    } else {
      throw DataError("config: estimator must be 'fitted' or 'oracle'");
    }
    if (root["oracle_params"]) {
      fs::path p = scalar<std::string>(root["oracle_params"], "oracle_params");
      cfg.oracle_params = p.is_relative() ? base_dir / p : p;
    }
    cfg.budget = value_or<std::size_t>(root, "budget", cfg.budget);
    cfg.k = value_or<std::size_t>(root, "k", cfg.k);
    cfg.jobs = value_or<std::size_t>(root, "jobs", cfg.jobs);
    cfg.profile = value_or<bool>(root, "profile", cfg.profile);
    cfg.mode = parse_sim_mode(root["sim_mode"]);
    if (const auto seeds = root["seeds"]) {
      cfg.seeds.clear();
      if (seeds.IsSequence()) {
        for (const auto& s : seeds) cfg.seeds.push_back(scalar<std::uint64_t>(s, "seeds"));
      } else {
        cfg.seeds.push_back(scalar<std::uint64_t>(seeds, "seeds"));
      }
    }
    if (const auto t = root["tasks"]) {
      reject_unknown(t, {"tga", "gpp"}, "tasks");
      cfg.tasks.tga = static_cast<bool>(t["tga"]);
      cfg.tasks.gpp = static_cast<bool>(t["gpp"]);
      if (t["tga"] && t["tga"].IsMap()) {
        reject_unknown(t["tga"], {"max_targets"}, "tasks.tga");
        cfg.tasks.max_targets = value_or<std::size_t>(t["tga"], "max_targets", 4);
      }
      if (t["gpp"] && t["gpp"].IsMap()) {
        reject_unknown(t["gpp"], {"threshold"}, "tasks.gpp");
        cfg.tasks.threshold =
            value_or<double>(t["gpp"], "threshold", kDefaultMasteryThreshold);
      }
    }
    if (const auto vs = root["variants"]) {
      if (!vs.IsSequence()) throw DataError("config: variants must be a list");
      cfg.variants.clear();
      for (const auto& v : vs) {
        reject_unknown(v, {"name", "perturbations"}, "variant");
        VariantSpec spec;
        spec.name = scalar<std::string>(v["name"], "variant.name");
        if (const auto ps = v["perturbations"]) {
          for (const auto& p : ps) {
            reject_unknown(p, {"kind", "level", "seed", "scope"}, "perturbation");
            PerturbationSpec ps_spec;
            ps_spec.kind = parse_perturbation_kind(scalar<std::string>(p["kind"], "kind"));
            ps_spec.level = scalar<double>(p["level"], "level");
            ps_spec.seed = value_or<std::uint64_t>(p, "seed", 0);
            const auto scope = value_or<std::string>(p, "scope", "all");
            if (scope != "all" && scope != "train") {
              throw DataError("config: perturbation scope must be 'all' or 'train'");
            }
            ps_spec.train_only = scope == "train";
            spec.perturbations.push_back(ps_spec);
          }
        }
        cfg.variants.push_back(std::move(spec));
      }
    }
    if (const auto ms = root["methods"]) {
      if (!ms.IsSequence()) throw DataError("config: methods must be a list");
      for (const auto& m : ms) {
        reject_unknown(m, {"name", "type", "params", "search"}, "method");
        MethodSpec spec;
        spec.kind = parse_method_kind(scalar<std::string>(m["type"], "method.type"));
        spec.name = value_or<std::string>(m, "name", to_string(spec.kind));
        spec.params = parse_params(m["params"], "methods." + spec.name + ".params");
        if (m["search"]) spec.search = parse_search(m["search"], "methods." + spec.name + ".search");
        cfg.methods.push_back(std::move(spec));
      }
    }
    cfg.validate();
  } catch (const YAML::Exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

WeightVector task_weights(TaskKind task, const TaskSettings& settings,
                          const MasteryVector& m, StudentId student,
                          std::uint64_t seed) {
  if (task == TaskKind::Gpp) return build_gpp_weights(m, settings.threshold);
  const auto unmastered = unmastered_concepts(m, settings.threshold);
  if (unmastered.empty()) return WeightVector::zeros(m.size());
  Rng rng(derive_seed(seed ^ kTargetStream, student));
  const auto picks = sample_without_replacement(
      unmastered.size(), std::min(settings.max_targets, unmastered.size()), rng);
  std::vector<ConceptId> targets;
  for (std::size_t i : picks) targets.push_back(unmastered[i]);
  return build_tga_weights(targets, m.size());
}

Split split_students(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, kSplitStream));
  shuffle(order, rng);
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  s.validation.assign(order.begin() + static_cast<long>(n_train),
                      order.begin() + static_cast<long>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
  for (auto* v : {&s.train, &s.validation, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

Dataset apply_perturbations(const Dataset& d, const VariantSpec& v, const Split& split) {
  Dataset out = d;
  for (const auto& p : v.perturbations) {
    switch (p.kind) {
      case PerturbationKind::Sparsity:
        out = perturb_sparsity(out, p.level, p.seed);
        break;
      case PerturbationKind::ColdStart: {
        if (!(p.level >= 1.0) || p.level != std::floor(p.level)) {
          throw InvalidArgument("cold-start level must be a positive integer");
        }
        out = perturb_coldstart(out, static_cast<std::size_t>(p.level));
        break;
      }
      case PerturbationKind::Noise:
        // An empty train list would otherwise mean "everyone".
        if (p.train_only && split.train.empty()) break;
        out = perturb_noise(out, p.level, p.seed,
                            p.train_only ? split.train : std::vector<std::size_t>{});
        break;
    }
  }
  return out;
}

std::unique_ptr<Recommender> train_method(const MethodSpec& spec, const ParamSet& overrides,
                                          const TrainingContext& ctx, std::uint64_t seed) {
  const ParamSet p = resolve_params(spec, overrides);
  const bool exclude = p.count("exclude_attempted") && p.at("exclude_attempted") != 0.0;
  switch (spec.kind) {
    case MethodKind::Greedy:
      return std::make_unique<GreedyRecommender>(ctx.budget, exclude);
    case MethodKind::Diverse:
      return std::make_unique<DiverseRecommender>(ctx.budget, exclude,
                                                  as_count(p, "pool_size"));
    case MethodKind::Beam:
      return std::make_unique<BeamRecommender>(as_count(p, "width"));
    case MethodKind::Dqn:
    case MethodKind::ActorCritic:
      break;
  }

  if (!ctx.estimator || !ctx.logs) throw InvalidArgument("training context is incomplete");
  if (ctx.train_students.empty()) throw InvalidArgument("no training students");
  const Estimator& est = *ctx.estimator;
  std::vector<MasteryVector> starts;
  starts.reserve(ctx.train_students.size());
  for (std::size_t s : ctx.train_students) starts.push_back(est.estimate((*ctx.logs)[s]));
  const EpisodeFactory factory = [&](Rng& rng) {
    const std::size_t i = uniform_index(rng, starts.size());
    EnvState s;
    s.mastery = starts[i];
    s.weights = task_weights(ctx.task, ctx.settings, starts[i],
                             static_cast<StudentId>(ctx.train_students[i]), rng());
    s.budget = ctx.budget;
    return s;
  };
  const std::size_t episodes = as_count(p, "episodes");
  const std::uint64_t train_seed = derive_seed(seed, kTrainStream);
  if (spec.kind == MethodKind::Dqn) {
    LinearQ agent;
    agent.alpha = p.at("alpha");
    agent.gamma = p.at("gamma");
    agent.epsilon_start = p.at("epsilon_start");
    agent.epsilon_end = p.at("epsilon_end");
    agent.decay_fraction = p.at("decay_fraction");
    agent.threshold = ctx.settings.threshold;
    return std::make_unique<ValueAgentRecommender>(
        dqn_train(factory, agent, est, episodes, train_seed, ctx.mode), ctx.mode);
  }
  SoftmaxPolicy policy;
  policy.actor_step = p.at("actor_step");
  policy.critic_step = p.at("critic_step");
  policy.gamma = p.at("gamma");
  policy.threshold = ctx.settings.threshold;
  return std::make_unique<PolicyAgentRecommender>(
      ac_train(factory, policy, est, episodes, train_seed, ctx.mode), ctx.mode);
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (const auto* synth = std::get_if<SynthConfig>(&cfg.dataset)) {
    return synth_generate(*synth).dataset;
  }
  return read_bundle(std::get<fs::path>(cfg.dataset));
}

std::shared_ptr<const Estimator> make_estimator(const ExperimentConfig& cfg, const Dataset& d) {
  BktParams params;
  if (cfg.estimator == EstimatorMode::Fitted) {
    params = fit_bkt(d.logs, d.q, d.prereqs);
  } else if (cfg.oracle_params) {
    params = bkt_params_from_json(read_json_file(*cfg.oracle_params));
  } else if (const auto* synth = std::get_if<SynthConfig>(&cfg.dataset)) {
    params = synth->center_params();
  } else {
    throw InvalidArgument("oracle estimator on a bundle needs oracle_params");
  }
  return std::make_shared<const Estimator>(d.q, std::move(params), d.prereqs);
}

Evaluation evaluate_method(const Recommender& rec, const Estimator& est, const Dataset& d,
                           const std::vector<std::size_t>& students, TaskKind task,
                           const ExperimentConfig& cfg, std::uint64_t seed) {
  Evaluation ev;
  ev.values.assign(students.size(), 0.0);
  auto work = [&](std::size_t i) {
    const History& h = d.logs[students[i]];
    EnvState start;
    start.mastery = est.estimate(h);
    start.weights = task_weights(task, cfg.tasks, start.mastery,
                                 static_cast<StudentId>(students[i]), seed);
    start.budget = cfg.budget;
    const LearningPath path = rec.recommend(est, h, start);
    ev.values[i] = wcg_at_k(est, h, path, start.weights, cfg.k, cfg.mode);
  };
  const std::size_t jobs = std::min(cfg.jobs, std::max<std::size_t>(students.size(), 1));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < students.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          for (std::size_t i = j; i < students.size(); i += jobs) work(i);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  ev.mean = mean_of(ev.values);
  return ev;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset base = load_dataset(cfg);
  if (base.logs.empty()) throw DataError("dataset has no students");
  const auto tasks = enabled_tasks(cfg.tasks);
  std::vector<ReportRow> rows;

  for (const auto& variant : cfg.variants) {
    // Prepared per seed only when a perturbation depends on the split.
    struct Prepared {
      Split split;
      Dataset data;
      std::shared_ptr<const Estimator> est;
    };
    std::vector<Prepared> prepared;
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      Split split = split_students(base.logs.size(), cfg.seeds[si]);
      if (si > 0 && !seed_dependent(variant)) {
        prepared.push_back({std::move(split), prepared[0].data, prepared[0].est});
        continue;
      }
      Dataset data = apply_perturbations(base, variant, split);
      auto est = make_estimator(cfg, data);
      prepared.push_back({std::move(split), std::move(data), std::move(est)});
    }
    std::set<std::string> fingerprints;
    for (const auto& p : prepared) fingerprints.insert(p.est->fingerprint());
    std::string fingerprint;
    for (const auto& f : fingerprints) fingerprint += (fingerprint.empty() ? "" : ";") + f;

    for (const auto& method : cfg.methods) {
      std::vector<ReportRow> method_rows;
      for (TaskKind task : tasks) {
        ReportRow r;
        r.method = method.name;
        r.variant = variant.name;
        r.task = to_string(task);
        r.k = cfg.k;
        r.estimator = fingerprint;
        r.profiled = cfg.profile;
        r.peak_memory_bytes = 0;
        method_rows.push_back(std::move(r));
      }
      try {
        ParamSet params = resolve_params(method, method.params);
        if (method.search) {
          const auto& p0 = prepared.front();
          const TaskKind search_task = parse_task(method.search->task);
          const auto result = random_search(
              method.search->space,
              [&](const ParamSet& trial) {
                ParamSet merged = params;
                for (const auto& [k, v] : trial) merged[k] = v;
                TrainingContext ctx{p0.est.get(), &p0.data.logs, p0.split.train, search_task,
                                    cfg.tasks, cfg.budget, cfg.mode};
                auto rec = train_method(method, merged, ctx, cfg.seeds.front());
                return evaluate_method(*rec, *p0.est, p0.data, p0.split.validation,
                                       search_task, cfg, cfg.seeds.front())
                    .mean;
              },
              derive_seed(cfg.seeds.front(), kSearchStream));
          for (const auto& [k, v] : result.best) params[k] = v;
        }
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
          ReportRow& row = method_rows[ti];
          row.hyperparams = params;
          std::vector<double> pooled;
          std::size_t peak = 0;
          bool memory_ok = true;
          for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const auto& p = prepared[si];
            const TrainingContext ctx{p.est.get(), &p.data.logs, p.split.train, tasks[ti],
                                      cfg.tasks, cfg.budget, cfg.mode};
            std::unique_ptr<Recommender> rec;
            Evaluation ev;
            auto train = [&] { rec = train_method(method, params, ctx, cfg.seeds[si]); };
            auto infer = [&] {
              ev = evaluate_method(*rec, *p.est, p.data, p.split.test, tasks[ti], cfg,
                                   cfg.seeds[si]);
            };
            if (cfg.profile) {
              const auto t = profile(train);
              const auto i = profile(infer);
              row.train_time_s += t.wall_seconds;
              row.infer_time_s += i.wall_seconds;
              if (t.peak_memory_bytes && i.peak_memory_bytes) {
                peak = std::max({peak, *t.peak_memory_bytes, *i.peak_memory_bytes});
              } else {
                memory_ok = false;
              }
            } else {
              train();
              infer();
            }
            row.per_seed.push_back(ev.mean);
            pooled.insert(pooled.end(), ev.values.begin(), ev.values.end());
            row.students += ev.values.size();
          }
          row.mean = mean_of(row.per_seed);
          row.std = population_std(pooled);
          if (cfg.profile) {
            row.peak_memory_bytes = memory_ok ? std::optional<std::size_t>(peak) : std::nullopt;
          }
        }
      } catch (const std::exception& e) {
        for (auto& row : method_rows) {
          row.status = std::string("failed: ") + e.what();
          row.mean = 0.0;
          row.std = 0.0;
          row.per_seed.clear();
          row.students = 0;
        }
      }
      for (auto& r : method_rows) rows.push_back(std::move(r));
    }
  }
  return rows;
}

SearchResult search_method(const ExperimentConfig& cfg, const std::string& name,
                           std::optional<std::size_t> trials) {
  cfg.validate();
  const MethodSpec& method = cfg.method(name);
  if (!method.search) {
    throw InvalidArgument("method '" + name + "' has no search section in the config");
  }
  MethodSearch search = *method.search;
  if (trials) search.space.trial_budget = *trials;
  const Dataset base = load_dataset(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  const Split split = split_students(base.logs.size(), seed);
  const Dataset data = apply_perturbations(base, cfg.variants.front(), split);
  const auto est = make_estimator(cfg, data);
  const TaskKind task = parse_task(search.task);
  const ParamSet params = resolve_params(method, method.params);
  return random_search(
      search.space,
      [&](const ParamSet& trial) {
        ParamSet merged = params;
        for (const auto& [k, v] : trial) merged[k] = v;
        TrainingContext ctx{est.get(), &data.logs, split.train, task, cfg.tasks, cfg.budget,
                            cfg.mode};
        auto rec = train_method(method, merged, ctx, seed);
        return evaluate_method(*rec, *est, data, split.validation, task, cfg, seed).mean;
      },
      derive_seed(seed, kSearchStream));
}

}  // namespace unier
