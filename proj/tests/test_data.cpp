#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "unier/data.hpp"
#include "unier/error.hpp"

using namespace unier;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("unier_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig small_synth(std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.students = 30;
  cfg.concepts = 4;
  cfg.exercises = 8;
  cfg.chain_depth = 3;
  cfg.log_length = 20;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("log loading groups, orders and remaps") {
  TempDir dir("logs");
  const auto f = dir.write("logs.csv",
                           "student_id,exercise_id,correct,timestamp\n"
                           "s9,ex_b,1,20\n"
                           "s9,ex_a,0,10\n");
  const LogTable t = load_logs(f);
  REQUIRE(t.logs.size() == 1);
  CHECK(t.logs[0].size() == 2);
  CHECK(t.exercises.name(t.logs[0].items[0].exercise) == "ex_a");
  CHECK_FALSE(t.logs[0].items[0].correct);
  CHECK(t.logs[0].items[0].step < t.logs[0].items[1].step);
  CHECK(t.students.name(0) == "s9");

  const LogTable again = load_logs(f);
  CHECK(again.logs == t.logs);
  CHECK(again.exercises == t.exercises);
}

TEST_CASE("log loading without timestamps keeps file order") {
  TempDir dir("logs_nots");
  const auto f = dir.write("logs.csv", "student_id,exercise_id,correct\na,x,1\nb,y,0\na,y,1\n");
  const LogTable t = load_logs(f);
  REQUIRE(t.logs.size() == 2);
  CHECK(t.logs[0].size() == 2);
  CHECK(t.logs[0].items[1].exercise == 1);
}

TEST_CASE("a bad correctness label reports its line") {
  TempDir dir("logs_bad");
  const auto f = dir.write("logs.csv", "student_id,exercise_id,correct\na,x,1\na,x,2\n");
  try {
    load_logs(f);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_logs(dir.path / "missing.csv"), DataError);
}

TEST_CASE("q-matrix and prerequisite files") {
  TempDir dir("qm");
  const auto qf = dir.write("q.csv", "exercise_id,concept_id\ne0,A\ne1,B\ne2,A\ne2,B\n");
  const QMatrixTable t = load_qmatrix(qf);
  CHECK(t.q.pairs().size() == 4);
  CHECK(t.q.num_exercises() == 3);
  CHECK(t.q.num_concepts() == 2);

  const auto cyc = dir.write("p.csv", "prereq_concept,dependent_concept\nA,B\nB,A\n");
  CHECK_THROWS_AS(load_prereqs(cyc, t.concepts), DataError);
  const auto empty = dir.write("e.csv", "prereq_concept,dependent_concept\n");
  CHECK(load_prereqs(empty, t.concepts).is_flat());
  const auto dangling = dir.write("d.csv", "prereq_concept,dependent_concept\nA,Z\n");
  CHECK_THROWS_AS(load_prereqs(dangling, t.concepts), DataError);
}

TEST_CASE("ingest rejects exercises missing from the q-matrix") {
  TempDir dir("ingest");
  const auto qf = dir.write("q.csv", "exercise_id,concept_id\ne0,A\n");
  const auto lf = dir.write("l.csv", "student_id,exercise_id,correct\ns,e1,1\n");
  CHECK_THROWS_AS(ingest(lf, qf, std::nullopt), DataError);
  const auto ok = dir.write("ok.csv", "student_id,exercise_id,correct\ns,e0,1\n");
  const Dataset d = ingest(ok, qf, std::nullopt);
  CHECK(d.prereqs.is_flat());
  CHECK(d.num_interactions() == 1);
}

TEST_CASE("bundles round-trip") {
  TempDir dir("bundle");
  const Dataset d = synth_generate(small_synth()).dataset;
  write_bundle(d, dir.path / "a");
  const Dataset back = read_bundle(dir.path / "a");
  CHECK(back == d);
  write_bundle(back, dir.path / "b");
  for (const char* name : {"logs.csv", "qmatrix.csv", "prereqs.csv", "idmap.json"}) {
    CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
  }
}

TEST_CASE("synthetic generation") {
  const auto a = synth_generate(small_synth(5));
  const auto b = synth_generate(small_synth(5));
  CHECK(a.dataset == b.dataset);
  CHECK(a.students.size() == 30);
  CHECK(a.dataset.prereqs.edges().size() == 2);
  CHECK(a.dataset.q.concepts_of(5)[0] == 1);
  CHECK_FALSE(synth_generate(small_synth(6)).dataset == a.dataset);

  SynthConfig flat = small_synth();
  flat.chain_depth = 1;
  CHECK(synth_generate(flat).dataset.prereqs.is_flat());

  SynthConfig big = small_synth();
  big.students = 200;
  big.log_length = 50;
  CHECK(synth_generate(big).dataset.num_interactions() == 10000);

  SynthConfig bad = small_synth();
  bad.chain_depth = 9;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = small_synth();
  bad.exercises = 2;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("sparsity keeps an ordered subset of floor(r * len)") {
  const Dataset d = synth_generate(small_synth()).dataset;
  for (double r : {0.2, 0.4, 0.8}) {
    const Dataset s = perturb_sparsity(d, r, 3);
    CHECK(s.q == d.q);
    REQUIRE(s.logs.size() == d.logs.size());
    for (std::size_t i = 0; i < d.logs.size(); ++i) {
      CHECK(s.logs[i].size() == ratio_count(r, d.logs[i].size()));
      std::size_t j = 0;
      for (const auto& it : s.logs[i].items) {
        while (j < d.logs[i].size() && !(d.logs[i].items[j] == it)) ++j;
        CHECK(j < d.logs[i].size());
        ++j;
      }
    }
    CHECK(perturb_sparsity(d, r, 3) == s);
  }
  CHECK(ratio_count(0.4, 10) == 4);
  CHECK(perturb_sparsity(d, 1.0, 3) == d);
  CHECK_THROWS_AS(perturb_sparsity(d, 0.0, 3), InvalidArgument);
  CHECK_THROWS_AS(perturb_sparsity(d, 1.5, 3), InvalidArgument);
}

TEST_CASE("cold start truncates") {
  SynthConfig cfg = small_synth();
  cfg.log_length = 50;
  const Dataset d = synth_generate(cfg).dataset;
  const Dataset c = perturb_coldstart(d, 5);
  for (std::size_t i = 0; i < d.logs.size(); ++i) {
    REQUIRE(c.logs[i].size() == 5);
    for (std::size_t j = 0; j < 5; ++j) CHECK(c.logs[i].items[j] == d.logs[i].items[j]);
  }
  CHECK(perturb_coldstart(c, 5) == c);
  CHECK(perturb_coldstart(c, 8) == c);
  CHECK_THROWS_AS(perturb_coldstart(d, 0), InvalidArgument);
}

TEST_CASE("noise flips exactly floor(r * len) distinct labels and is an involution") {
  const Dataset d = synth_generate(small_synth()).dataset;
  for (double r : {0.05, 0.10, 0.15, 0.20}) {
    const Dataset n = perturb_noise(d, r, 11);
    for (std::size_t i = 0; i < d.logs.size(); ++i) {
      std::size_t flips = 0;
      for (std::size_t j = 0; j < d.logs[i].size(); ++j) {
        CHECK(n.logs[i].items[j].exercise == d.logs[i].items[j].exercise);
        flips += n.logs[i].items[j].correct != d.logs[i].items[j].correct ? 1 : 0;
      }
      CHECK(flips == ratio_count(r, d.logs[i].size()));
    }
    CHECK(perturb_noise(n, r, 11) == d);
  }
  CHECK(perturb_noise(d, 0.0, 11) == d);
  CHECK_THROWS_AS(perturb_noise(d, -0.1, 1), InvalidArgument);

  const std::vector<std::size_t> only = {0};
  const Dataset part = perturb_noise(d, 0.2, 11, only);
  CHECK_FALSE(part.logs[0] == d.logs[0]);
  for (std::size_t i = 1; i < d.logs.size(); ++i) CHECK(part.logs[i] == d.logs[i]);
}
