#pragma once

// Dataset ingestion (CSV logs, Q-matrix, prerequisites, bundles), synthetic
// population generation, and the three history perturbations.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "unier/core.hpp"
#include "unier/simulator.hpp"

namespace unier {

// Bijection between external string ids and dense indices, assigned in
// order of first appearance.
class IdMap {
 public:
  IdMap() = default;
  // Throws DataError on duplicate names.
  static IdMap from_names(std::vector<std::string> names);

  std::size_t intern(const std::string& name);
  std::optional<std::size_t> find(const std::string& name) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  friend bool operator==(const IdMap& a, const IdMap& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct IdMaps {
  IdMap students;
  IdMap exercises;
  IdMap concepts;

  friend bool operator==(const IdMaps&, const IdMaps&) = default;
};

struct Dataset {
  QMatrix q;
  PrerequisiteGraph prereqs;
  std::vector<History> logs;
  IdMaps ids;

  std::size_t num_interactions() const;
  // Throws DataError when logs reference unknown exercises or are unordered.
  void validate() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.q == b.q && a.prereqs.edges() == b.prereqs.edges() &&
           a.logs == b.logs && a.ids == b.ids;
  }
};

struct LogTable {
  std::vector<History> logs;
  IdMap students;
  IdMap exercises;
};

// Parses `student_id,exercise_id,correct[,timestamp]`. Rows are grouped per
// student and ordered by timestamp, then by file order; steps are ordinal.
// When `known_exercises` is given, exercise ids must already exist in it and
// keep its indices.
LogTable load_logs(const std::filesystem::path& path,
                   const IdMap* known_exercises = nullptr,
                   IdMap students = {});

struct QMatrixTable {
  QMatrix q;
  IdMap exercises;
  IdMap concepts;
};

// Parses `exercise_id,concept_id` pairs. Seeded maps (as read from a
// bundle's idmap.json) fix the index order; unknown ids are rejected when a
// map is seeded.
QMatrixTable load_qmatrix(const std::filesystem::path& path,
                          std::optional<IdMap> exercises = std::nullopt,
                          std::optional<IdMap> concepts = std::nullopt);

// Parses `prereq_concept,dependent_concept` edges against known concepts.
// An empty file (header only) is a flat graph.
PrerequisiteGraph load_prereqs(const std::filesystem::path& path,
                               const IdMap& concepts);

Dataset ingest(const std::filesystem::path& logs,
               const std::filesystem::path& qmatrix,
               const std::optional<std::filesystem::path>& prereqs);

// A bundle is a directory with logs.csv, qmatrix.csv, prereqs.csv and
// idmap.json.
void write_bundle(const Dataset& d, const std::filesystem::path& dir);
Dataset read_bundle(const std::filesystem::path& dir);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
};

struct SynthConfig {
  std::size_t students = 200;
  std::size_t concepts = 8;
  std::size_t exercises = 24;
  std::size_t chain_depth = 8;
  std::size_t log_length = 50;
  std::uint64_t seed = 0;
  Range p_init{0.05, 0.40};
  Range p_learn{0.10, 0.40};
  Range p_guess{0.10, 0.25};
  Range p_slip{0.05, 0.15};

  void validate() const;
  // Range midpoints for every concept.
  BktParams center_params() const;
};

struct SyntheticPopulation {
  Dataset dataset;
  // Hidden students in the state they reached after generating their logs.
  std::vector<GroundTruthStudent> students;
};

// Chain prerequisites over the first chain_depth concepts, exercise e covers
// concept e mod |C|, per-student parameters drawn from the ranges, and logs
// generated from uniformly drawn exercises. Fully determined by cfg.seed.
SyntheticPopulation synth_generate(const SynthConfig& cfg);

// Keeps floor(keep_ratio * len) interactions per student, order preserved.
Dataset perturb_sparsity(const Dataset& d, double keep_ratio, std::uint64_t seed);

// Truncates every history to its first max_len interactions.
Dataset perturb_coldstart(const Dataset& d, std::size_t max_len);

// Flips floor(flip_ratio * len) distinct labels per student. The index set
// depends only on (seed, student, len), so applying it twice is identity.
// When `only_students` is non-empty, other students are left untouched.
Dataset perturb_noise(const Dataset& d, double flip_ratio, std::uint64_t seed,
                      const std::vector<std::size_t>& only_students = {});

// floor(ratio * len) with a guard against representation error.
std::size_t ratio_count(double ratio, std::size_t len);

}  // namespace unier
