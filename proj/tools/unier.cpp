// Command-line driver for the benchmark pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data or configuration error,
// 3 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "unier/data.hpp"
#include "unier/error.hpp"
#include "unier/harness.hpp"
#include "unier/profile.hpp"
#include "unier/repro.hpp"
#include "unier/report.hpp"
#include "unier/serialize.hpp"

namespace fs = std::filesystem;
using namespace unier;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kRuntimeFailure = 3;

// UNIER_SEED="3" or "0,1,2" replaces the configured seeds.
std::optional<std::vector<std::uint64_t>> env_seeds() {
  const char* v = std::getenv("UNIER_SEED");
  if (!v || !*v) return std::nullopt;
  std::vector<std::uint64_t> seeds;
  std::string s(v);
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("UNIER_SEED must be a comma-separated list of integers, got '" + s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

ExperimentConfig read_config(const fs::path& path, std::size_t jobs) {
  ExperimentConfig cfg = load_config(path);
  if (auto seeds = env_seeds()) cfg.seeds = *seeds;
  if (jobs > 0) cfg.jobs = jobs;
  return cfg;
}

// Keeps a single method in the config.
ExperimentConfig only_method(ExperimentConfig cfg, const std::string& name) {
  const MethodSpec m = cfg.method(name);
  cfg.methods = {m};
  return cfg;
}

void print_rows(const std::vector<ReportRow>& rows, bool costs) {
  for (const auto& r : rows) {
    std::printf("%-14s %-12s %s@%zu mean %.4f std %.4f n=%zu", r.method.c_str(), r.variant.c_str(),
                r.task.c_str(), r.k, r.mean, r.std, r.students);
    if (costs) {
      std::printf(" train %.3fs infer %.3fs", r.train_time_s, r.infer_time_s);
      if (r.peak_memory_bytes) {
        std::printf(" peak %.1f MiB", static_cast<double>(*r.peak_memory_bytes) / (1024.0 * 1024.0));
      } else {
        std::printf(" peak unavailable");
      }
    }
    if (r.status != "ok") std::printf(" [%s]", r.status.c_str());
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exercise-recommendation benchmark: simulate, fit, train, evaluate, report."};
  app.require_subcommand(1);
  std::size_t jobs = 0;
  app.add_option("--jobs", jobs, "Cap on harness worker threads (overrides the config)");

  std::string config, out, method, in_dir;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic population bundle");
  synth->add_option("--config", config, "Experiment config with a dataset.synthetic section")->required();
  synth->add_option("--out", out, "Output bundle directory")->required();

  std::string logs, qmatrix, prereqs;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert CSV logs and a Q-matrix into a bundle");
  ingest_cmd->add_option("--logs", logs, "student_id,exercise_id,correct[,timestamp] CSV")->required();
  ingest_cmd->add_option("--qmatrix", qmatrix, "exercise_id,concept_id CSV")->required();
  ingest_cmd->add_option("--prereqs", prereqs, "prereq_concept,dependent_concept CSV");
  ingest_cmd->add_option("--out", out, "Output bundle directory")->required();

  std::string kind;
  double level = 0.0;
  std::uint64_t seed = 0;
  auto* perturb = app.add_subcommand("perturb", "Apply sparsity, cold-start or label noise to a bundle");
  perturb->add_option("--in", in_dir, "Input bundle directory")->required();
  perturb->add_option("--kind", kind, "sparsity | coldstart | noise")
      ->required()
      ->check(CLI::IsMember({"sparsity", "coldstart", "noise"}));
  perturb->add_option("--level", level, "Keep ratio, history cap, or flip ratio")->required();
  perturb->add_option("--seed", seed, "Perturbation seed");
  perturb->add_option("--out", out, "Output bundle directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit estimator parameters to a bundle");
  fit->add_option("--in", in_dir, "Input bundle directory")->required();
  fit->add_option("--out", out, "Output parameter JSON")->required();

  std::string task = "gpp";
  auto* train = app.add_subcommand("train", "Train one method on the first variant and seed");
  train->add_option("--config", config, "Experiment config")->required();
  train->add_option("--method", method, "Method name from the config")->required();
  train->add_option("--task", task, "Task the agent is trained for: gpp | tga")
      ->check(CLI::IsMember({"gpp", "tga"}));
  train->add_option("--out", out, "Output JSON")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run the experiment and write reports");
  evaluate->add_option("--config", config, "Experiment config")->required();
  evaluate->add_option("--out", out, "Report directory")->required();

  std::size_t trials = 20;
  auto* search = app.add_subcommand("search", "Random search over a method's hyperparameters");
  search->add_option("--config", config, "Experiment config")->required();
  search->add_option("--method", method, "Method name from the config")->required();
  search->add_option("--trials", trials, "Trial budget")->capture_default_str();
  search->add_option("--out", out, "Output JSON with the best configuration")->required();

  auto* prof = app.add_subcommand("profile", "Measure training and inference cost of one method");
  prof->add_option("--config", config, "Experiment config")->required();
  prof->add_option("--method", method, "Method name from the config")->required();

  auto* report = app.add_subcommand("report", "Rebuild results.csv and report.md from results.json");
  report->add_option("--in", in_dir, "results.json")->required();
  report->add_option("--out", out, "Report directory")->required();

  std::string fixture = "all";
  bool list = false;
  auto* repro = app.add_subcommand("repro", "Run a named acceptance fixture");
  repro->add_option("--fixture", fixture, "Fixture name (see --list)")->capture_default_str();
  repro->add_flag("--list", list, "List fixtures and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) {
      ExperimentConfig cfg = load_config(config);
      auto* sc = std::get_if<SynthConfig>(&cfg.dataset);
      if (!sc) throw DataError(config + ": dataset is not synthetic");
      if (auto seeds = env_seeds()) sc->seed = seeds->front();
      const auto pop = synth_generate(*sc);
      write_bundle(pop.dataset, out);
      write_json_file(fs::path(out) / "oracle_params.json", to_json(sc->center_params()));
      std::printf("wrote %zu students, %zu interactions to %s\n", pop.dataset.logs.size(),
                  pop.dataset.num_interactions(), out.c_str());
    } else if (*ingest_cmd) {
      const Dataset d = ingest(logs, qmatrix, prereqs.empty() ? std::nullopt
                                                               : std::optional<fs::path>(prereqs));
      write_bundle(d, out);
      std::printf("wrote %zu students, %zu exercises, %zu concepts to %s\n", d.logs.size(),
                  d.q.num_exercises(), d.q.num_concepts(), out.c_str());
    } else if (*perturb) {
      const Dataset d = read_bundle(in_dir);
      Dataset p;
      if (kind == "sparsity") {
        p = perturb_sparsity(d, level, seed);
      } else if (kind == "coldstart") {
        if (level < 1.0 || level != static_cast<double>(static_cast<std::size_t>(level))) {
          throw InvalidArgument("cold-start level must be a positive integer");
        }
        p = perturb_coldstart(d, static_cast<std::size_t>(level));
      } else {
        p = perturb_noise(d, level, seed);
      }
      write_bundle(p, out);
      std::printf("%zu -> %zu interactions\n", d.num_interactions(), p.num_interactions());
    } else if (*fit) {
      const Dataset d = read_bundle(in_dir);
      const BktParams params = fit_bkt(d.logs, d.q, d.prereqs);
      write_json_file(out, to_json(params));
      std::printf("wrote %s\n", out.c_str());
    } else if (*train) {
      const ExperimentConfig cfg = read_config(config, jobs);
      cfg.validate();
      const MethodSpec& spec = cfg.method(method);
      const Dataset base = load_dataset(cfg);
      const Split split = split_students(base.logs.size(), cfg.seeds.front());
      const Dataset data = apply_perturbations(base, cfg.variants.front(), split);
      const auto est = make_estimator(cfg, data);
      const TaskKind tk = task == "tga" ? TaskKind::Tga : TaskKind::Gpp;
      TrainingContext ctx{est.get(), &data.logs, split.train, tk, cfg.tasks, cfg.budget, cfg.mode};
      const auto rec = train_method(spec, spec.params, ctx, cfg.seeds.front());
      ParamSet params = default_params(spec.kind);
      for (const auto& [k, v] : spec.params) params[k] = v;
      nlohmann::json j = {{"method", spec.name},
                          {"type", to_string(spec.kind)},
                          {"task", to_string(tk)},
                          {"seed", cfg.seeds.front()},
                          {"estimator", est->fingerprint()},
                          {"hyperparams", params},
                          {"model", rec->to_json()}};
      write_json_file(out, j);
      std::printf("wrote %s\n", out.c_str());
    } else if (*evaluate) {
      const ExperimentConfig cfg = read_config(config, jobs);
      const auto rows = run_experiment(cfg);
      write_reports(rows, out);
      print_rows(rows, cfg.profile);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      if (failed) {
        std::fprintf(stderr, "%zu rows failed; see %s/report.md\n", failed, out.c_str());
        return kRuntimeFailure;
      }
    } else if (*search) {
      const ExperimentConfig cfg = read_config(config, jobs);
      const SearchResult r = search_method(cfg, method, trials);
      nlohmann::json tj = nlohmann::json::array();
      for (const auto& t : r.trials) {
        nlohmann::json e = {{"params", t.params}};
        e["objective"] = t.objective ? nlohmann::json(*t.objective) : nlohmann::json(nullptr);
        if (!t.error.empty()) e["error"] = t.error;
        tj.push_back(std::move(e));
      }
      write_json_file(out, {{"method", method},
                            {"best", r.best},
                            {"best_objective", r.best_objective},
                            {"best_trial", r.best_trial},
                            {"trials", tj}});
      std::printf("best of %zu trials (trial %zu): %.6f\n", r.trials.size(), r.best_trial,
                  r.best_objective);
    } else if (*prof) {
      ExperimentConfig cfg = only_method(read_config(config, jobs), method);
      cfg.profile = true;
      // Profiled rows run alone so timings are not skewed by other workers.
      cfg.jobs = 1;
      print_rows(run_experiment(cfg), true);
    } else if (*report) {
      const auto rows = rows_from_json(read_json_file(in_dir));
      write_reports(rows, out);
      std::printf("wrote %zu rows to %s\n", rows.size(), out.c_str());
    } else if (*repro) {
      if (list) {
        for (const auto& f : repro::fixtures()) {
          std::printf("%-13s %s\n", f.name.c_str(), f.description.c_str());
        }
        return 0;
      }
      int failed = 0;
      for (const auto& r : repro::run_fixture(fixture)) {
        std::printf("%s\n", repro::format_result(r).c_str());
        std::fflush(stdout);
        failed += !r.passed;
      }
      if (failed) return kRuntimeFailure;
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kRuntimeFailure;
  }
  return 0;
}
