#pragma once

// Experiment orchestration: dataset variants, one shared estimator per
// variant, per-method training and evaluation on held-out students,
// hyperparameter search, cost profiling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "unier/data.hpp"
#include "unier/metrics.hpp"
#include "unier/pler.hpp"
#include "unier/search.hpp"
#include "unier/simulator.hpp"

namespace unier {

enum class MethodKind { Greedy, Diverse, Dqn, ActorCritic, Beam };

MethodKind parse_method_kind(const std::string& s);
std::string to_string(MethodKind kind);
bool is_path_level(MethodKind kind);

struct MethodSearch {
  SearchSpace space;
  // Task whose validation WCG@k is maximised.
  std::string task = "gpp";
};

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::Greedy;
  ParamSet params;
  std::optional<MethodSearch> search;
};

// Hyperparameter names accepted by a method kind, with their defaults.
ParamSet default_params(MethodKind kind);

enum class PerturbationKind { Sparsity, ColdStart, Noise };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::Noise;
  double level = 0.0;
  std::uint64_t seed = 0;
  // Noise only: restrict flips to training students.
  bool train_only = false;
};

struct VariantSpec {
  std::string name = "clean";
  std::vector<PerturbationSpec> perturbations;
};

struct TaskSettings {
  bool tga = true;
  bool gpp = true;
  std::size_t max_targets = 4;
  double threshold = kDefaultMasteryThreshold;
};

enum class EstimatorMode { Fitted, Oracle };

struct ExperimentConfig {
  std::variant<SynthConfig, std::filesystem::path> dataset = SynthConfig{};
  EstimatorMode estimator = EstimatorMode::Fitted;
  // Oracle parameters for bundle datasets; synthetic datasets default to
  // the range midpoints.
  std::optional<std::filesystem::path> oracle_params;
  std::vector<MethodSpec> methods;
  TaskSettings tasks;
  std::size_t budget = 10;
  std::size_t k = 10;
  SimMode mode = ExpectedMode{};
  std::vector<VariantSpec> variants{VariantSpec{}};
  std::vector<std::uint64_t> seeds{0};
  std::size_t jobs = 1;
  // Cost columns are measured only when set; otherwise they are zero so
  // results.csv stays byte-reproducible.
  bool profile = false;

  void validate() const;
  const MethodSpec& method(const std::string& name) const;
};

// Reads the YAML experiment file. Relative paths inside it resolve against
// the file's directory. Throws DataError for unreadable or malformed files.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::filesystem::path& base_dir = ".");

struct ReportRow {
  std::string method;
  std::string variant;
  std::string task;
  std::size_t k = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t students = 0;
  std::vector<double> per_seed;
  double train_time_s = 0.0;
  double infer_time_s = 0.0;
  std::optional<std::size_t> peak_memory_bytes = 0;
  bool profiled = false;
  std::string estimator;
  std::string status = "ok";
  ParamSet hyperparams;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

enum class TaskKind { Tga, Gpp };
std::string to_string(TaskKind t);

// Weights for one student: GPP over unmastered concepts, or TGA over
// min(max_targets, |unmastered|) targets drawn with the student's seed.
// A student with nothing unmastered gets all-zero weights.
WeightVector task_weights(TaskKind task, const TaskSettings& settings,
                          const MasteryVector& m, StudentId student,
                          std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// 80/10/10 by seeded shuffle.
Split split_students(std::size_t n, std::uint64_t seed);

Dataset apply_perturbations(const Dataset& d, const VariantSpec& v,
                            const Split& split);

// A trained method. Immutable, safe to call from several threads.
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual LearningPath recommend(const Estimator& est, const History& h,
                                 const EnvState& start) const = 0;
  // Trained weights for path-level agents; null otherwise.
  virtual nlohmann::json to_json() const { return nullptr; }
};

struct TrainingContext {
  const Estimator* estimator = nullptr;
  const std::vector<History>* logs = nullptr;
  std::vector<std::size_t> train_students;
  TaskKind task = TaskKind::Gpp;
  TaskSettings settings;
  std::size_t budget = 10;
  SimMode mode = ExpectedMode{};
};

std::unique_ptr<Recommender> train_method(const MethodSpec& spec,
                                          const ParamSet& params,
                                          const TrainingContext& ctx,
                                          std::uint64_t seed);

Dataset load_dataset(const ExperimentConfig& cfg);
// The estimator every method of a variant shares: oracle parameters or
// parameters fitted on the variant's full log.
std::shared_ptr<const Estimator> make_estimator(const ExperimentConfig& cfg,
                                                const Dataset& d);

// Mean WCG@k of a method over `students` for one task.
struct Evaluation {
  std::vector<double> values;
  double mean = 0.0;
};
Evaluation evaluate_method(const Recommender& rec, const Estimator& est,
                           const Dataset& d,
                           const std::vector<std::size_t>& students,
                           TaskKind task, const ExperimentConfig& cfg,
                           std::uint64_t seed);

std::vector<ReportRow> run_experiment(const ExperimentConfig& cfg);

// Random search of one method's hyperparameters against validation WCG@k
// of the first variant and seed.
SearchResult search_method(const ExperimentConfig& cfg, const std::string& method,
                           std::optional<std::size_t> trials = std::nullopt);

}  // namespace unier
