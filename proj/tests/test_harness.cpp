#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "unier/error.hpp"
#include "unier/harness.hpp"
#include "unier/profile.hpp"
#include "unier/report.hpp"
#include "unier/search.hpp"

using namespace unier;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
dataset:
  synthetic: {students: 40, concepts: 4, exercises: 8, chain_depth: 4, log_length: 15, seed: 2}
budget: 5
k: 5
seeds: [0, 1]
methods:
  - {name: greedy, type: greedy}
  - {name: dqn, type: dqn, params: {episodes: 50}}
  - {name: beam, type: beam, params: {width: 2}}
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("unier_harness_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

ReportRow sample_row(const std::string& method, const std::string& task, double mean) {
  ReportRow r;
  r.method = method;
  r.variant = "clean";
  r.task = task;
  r.k = 10;
  r.mean = mean;
  r.std = 0.125;
  r.students = 20;
  r.per_seed = {mean, mean + 0.1 / 3.0};
  r.estimator = "00ff00ff00ff00ff";
  r.hyperparams = {{"episodes", 100}, {"alpha", 0.1}};
  return r;
}

}  // namespace

TEST_CASE("random search respects the trial budget") {
  SearchSpace space;
  space.params.push_back({"x", {}, 0.0, 1.0});
  space.trial_budget = 20;
  int calls = 0;
  const auto r = random_search(space, [&](const ParamSet& p) { ++calls; return p.at("x"); }, 4);
  CHECK(calls == 20);
  CHECK(r.trials.size() == 20);
  for (const auto& t : r.trials) CHECK(*t.objective <= r.best_objective);
}

TEST_CASE("a small discrete space is enumerated exactly once") {
  SearchSpace space;
  space.params.push_back({"a", {1, 2, 3}});
  std::set<double> seen;
  const auto r = random_search(space, [&](const ParamSet& p) { seen.insert(p.at("a")); return 0.0; }, 1);
  CHECK(r.trials.size() == 3);
  CHECK(seen.size() == 3);
}

TEST_CASE("ties go to the earliest trial") {
  SearchSpace space;
  space.params.push_back({"x", {}, 1.0, 100.0, true});
  space.trial_budget = 7;
  const auto r = random_search(space, [](const ParamSet&) { return 1.0; }, 8);
  CHECK(r.best_trial == 0);
  CHECK(r.best == r.trials[0].params);
  const double x = r.trials[0].params.at("x");
  CHECK(x >= 1.0);
  CHECK(x <= 100.0);
}

TEST_CASE("failed trials are skipped and an all-failed search throws") {
  SearchSpace space;
  space.params.push_back({"a", {1, 2}});
  const auto r = random_search(space,
                               [](const ParamSet& p) -> double {
                                 if (p.at("a") == 1) throw Error("boom");
                                 return 5.0;
                               },
                               0);
  CHECK(r.best.at("a") == 2);
  CHECK_THROWS_AS(random_search(space, [](const ParamSet&) -> double { throw Error("no"); }, 0), Error);
  SearchSpace bad;
  bad.params.push_back({"a", {}, 2.0, 1.0});
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("the wall-clock budget stops the search") {
  SearchSpace space;
  space.params.push_back({"x", {}, 0.0, 1.0});
  space.wall_clock_seconds = 0.05;
  const auto r = random_search(space,
                               [](const ParamSet&) {
                                 std::this_thread::sleep_for(std::chrono::milliseconds(30));
                                 return 0.0;
                               },
                               0);
  CHECK(r.trials.size() >= 1);
  CHECK(r.trials.size() <= 3);
}

TEST_CASE("profiling a sleep") {
  const auto r = profile([] { std::this_thread::sleep_for(std::chrono::seconds(1)); });
  CHECK(r.wall_seconds >= 1.0);
  CHECK(r.wall_seconds <= 1.5);
  const auto e = profile([] {});
  CHECK(e.wall_seconds >= 0.0);
}

TEST_CASE("profiling a 100 MB allocation") {
  if (!resident_bytes()) return;
  const auto r = profile([] {
    constexpr std::size_t n = 100'000'000;
    auto buf = std::make_unique<char[]>(n);
    std::memset(buf.get(), 1, n);
    volatile char sink = buf[n - 1];
    (void)sink;
    std::this_thread::sleep_for(std::chrono::milliseconds(150));
  });
  REQUIRE(r.peak_memory_bytes.has_value());
  CHECK(*r.peak_memory_bytes >= 90'000'000);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config(kSmall);
  CHECK(cfg.methods.size() == 3);
  CHECK(cfg.budget == 5);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.method("dqn").params.at("episodes") == 50);
  CHECK_THROWS_AS(parse_config("methods: []\n"), DataError);
  CHECK_THROWS_AS(parse_config(std::string(kSmall) + "bogus: 1\n"), DataError);
  CHECK_THROWS_AS(parse_config("methods:\n  - {name: g, type: greedy, params: {nope: 1}}\n"), DataError);
  CHECK_THROWS_AS(parse_config("methods:\n  - {name: g, type: magic}\n"), DataError);
  CHECK_THROWS_AS(parse_config("budget: 3\nk: 5\nmethods:\n  - {name: g, type: greedy}\n"), DataError);
  CHECK_THROWS_AS(load_config("/nonexistent/unier.yaml"), DataError);
  ExperimentConfig empty;
  CHECK_THROWS_AS(empty.validate(), InvalidArgument);
}

TEST_CASE("split is 80/10/10 and seeded") {
  const Split s = split_students(100, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 10);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  CHECK(split_students(100, 3).test == s.test);
  CHECK(split_students(100, 4).test != s.test);
}

TEST_CASE("TGA targets are capped and deterministic") {
  TaskSettings settings;
  const MasteryVector m({0.1, 0.2, 0.9, 0.3, 0.4, 0.05});
  const auto w = task_weights(TaskKind::Tga, settings, m, 7, 1);
  std::size_t nonzero = 0;
  for (double x : w.values()) nonzero += x > 0 ? 1 : 0;
  CHECK(nonzero == 4);
  CHECK(w[2] == 0.0);
  CHECK(task_weights(TaskKind::Tga, settings, m, 7, 1) == w);
  CHECK(task_weights(TaskKind::Tga, settings, MasteryVector({0.9, 0.8}), 0, 1).all_zero());
  CHECK(task_weights(TaskKind::Gpp, settings, m, 0, 1) == build_gpp_weights(m, 0.5));
}

TEST_CASE("experiments are deterministic and share one estimator") {
  const auto cfg = parse_config(kSmall);
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  CHECK(results_csv(a) == results_csv(b));
  REQUIRE(a.size() == 6);
  for (const auto& r : a) {
    CHECK(r.status == "ok");
    CHECK(r.estimator == a[0].estimator);
    CHECK(r.per_seed.size() == 2);
    CHECK(r.mean >= -1.0);
    CHECK(r.mean <= 1.0);
    CHECK(r.train_time_s == 0.0);
  }
  const Dataset d = load_dataset(cfg);
  CHECK(make_estimator(cfg, d)->fingerprint() == a[0].estimator);

  ExperimentConfig threaded = cfg;
  threaded.jobs = 3;
  CHECK(results_csv(run_experiment(threaded)) == results_csv(a));
}

TEST_CASE("a failing method does not take down the others") {
  const std::string text = std::string(kSmall) + "  - {name: broken, type: diverse, params: {pool_size: 100}}\n";
  const auto rows = run_experiment(parse_config(text));
  std::size_t failed = 0, ok = 0;
  for (const auto& r : rows) {
    if (r.method == "broken") {
      CHECK(r.status.rfind("failed: ", 0) == 0);
      ++failed;
    } else {
      CHECK(r.status == "ok");
      ++ok;
    }
  }
  CHECK(failed == 2);
  CHECK(ok == 6);
}

TEST_CASE("search inside an experiment") {
  const std::string text = R"(
dataset:
  synthetic: {students: 40, concepts: 4, exercises: 8, chain_depth: 4, log_length: 15, seed: 2}
budget: 4
k: 4
methods:
  - name: dqn
    type: dqn
    params: {episodes: 30}
    search:
      trials: 3
      space: {alpha: [0.05, 0.1, 0.2]}
)";
  const auto cfg = parse_config(text);
  const auto r = search_method(cfg, "dqn");
  CHECK(r.trials.size() == 3);
  const auto rows = run_experiment(cfg);
  CHECK(rows[0].hyperparams.at("alpha") == r.best.at("alpha"));
  CHECK(search_method(cfg, "dqn", 2).trials.size() == 2);
}

TEST_CASE("report files") {
  const auto dir = temp_dir("report");
  const std::vector<ReportRow> one = {sample_row("greedy", "gpp", 0.25)};
  write_reports(one, dir);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "results.json"));
  CHECK(fs::exists(dir / "report.md"));
  const std::string csv = slurp(dir / "results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(read_results_csv(dir / "results.csv") == one);
  CHECK(rows_from_json(results_json(one)) == one);
  CHECK_THROWS_AS(write_reports({}, dir), InvalidArgument);
  fs::remove_all(dir);
}

TEST_CASE("CSV round-trips awkward values") {
  std::vector<ReportRow> rows = {sample_row("dqn", "tga", -0.1), sample_row("m,with\"quote", "gpp", 1.0 / 3.0)};
  rows[0].peak_memory_bytes = std::nullopt;
  rows[1].status = "failed: bad, thing";
  rows[1].profiled = true;
  rows[1].train_time_s = 0.5;
  CHECK(parse_results_csv(results_csv(rows)) == rows);
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("markdown ranks each column") {
  const std::vector<ReportRow> rows = {
      sample_row("a", "GPP", 0.1), sample_row("b", "GPP", 0.4), sample_row("c", "GPP", 0.3),
      sample_row("d", "GPP", 0.2), sample_row("a", "TGA", 0.5)};
  const std::string md = results_markdown(rows);
  CHECK(md.find("**0.4000** [1]") != std::string::npos);
  CHECK(md.find("0.3000 [2]") != std::string::npos);
  CHECK(md.find("0.2000 [3]") != std::string::npos);
  CHECK(md.find("0.1000 [") == std::string::npos);
  CHECK(md.find("clean GPP@10") != std::string::npos);
  CHECK(md.find("Avg.") != std::string::npos);
}
