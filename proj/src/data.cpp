#include "unier/data.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unier/error.hpp"
#include "unier/random.hpp"

namespace unier {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  auto blank = [](unsigned char ch) { return std::isspace(ch) != 0; };
  while (!s.empty() && blank(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && blank(static_cast<unsigned char>(s[i]))) ++i;
  s.erase(0, i);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

class CsvReader {
 public:
  explicit CsvReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
  }

  // Reads the header and returns the column index of each required name
  // (or -1 for optional names that are absent).
  std::vector<int> header(const std::vector<std::string>& required,
                          const std::vector<std::string>& optional = {}) {
    std::string line;
    if (!next_line(line)) throw error("missing header");
    auto cols = split_csv(line);
    if (!cols.empty() && cols[0].rfind("\xEF\xBB\xBF", 0) == 0) {
      cols[0] = cols[0].substr(3);
    }
    width_ = cols.size();
    std::vector<int> idx;
    for (const auto& name : required) {
      auto it = std::find(cols.begin(), cols.end(), name);
      if (it == cols.end()) throw error("header lacks column '" + name + "'");
      idx.push_back(static_cast<int>(it - cols.begin()));
    }
    for (const auto& name : optional) {
      auto it = std::find(cols.begin(), cols.end(), name);
      idx.push_back(it == cols.end() ? -1 : static_cast<int>(it - cols.begin()));
    }
    return idx;
  }

  bool row(std::vector<std::string>& fields) {
    std::string line;
    while (next_line(line)) {
      if (trim(line).empty()) continue;
      fields = split_csv(line);
      if (fields.size() != width_) {
        throw error("expected " + std::to_string(width_) + " fields, found " +
                    std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  DataError error(const std::string& what) const {
    return DataError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  bool next_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t width_ = 0;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

IdMap IdMap::from_names(std::vector<std::string> names) {
  IdMap m;
  for (auto& n : names) {
    if (m.find(n)) throw DataError("duplicate id '" + n + "' in id map");
    m.intern(n);
  }
  return m;
}

std::size_t IdMap::intern(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, names_.size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::size_t> IdMap::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Dataset::num_interactions() const {
  std::size_t n = 0;
  for (const auto& h : logs) n += h.size();
  return n;
}

void Dataset::validate() const {
  if (prereqs.num_concepts() != q.num_concepts()) {
    throw DataError("prerequisite graph and q-matrix disagree on concept count");
  }
  for (const auto& h : logs) {
    try {
      validate_history(h, q.num_exercises());
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }
  }
}

LogTable load_logs(const fs::path& path, const IdMap* known_exercises,
                   IdMap students) {
  CsvReader csv(path);
  const auto cols = csv.header({"student_id", "exercise_id", "correct"}, {"timestamp"});
  struct Row {
    std::size_t student;
    ExerciseId exercise;
    bool correct;
    double time;
    std::size_t order;
  };
  std::vector<Row> rows;
  LogTable table;
  table.students = std::move(students);
  if (known_exercises) table.exercises = *known_exercises;
  std::vector<std::string> f;
  while (csv.row(f)) {
    const std::string& sid = f[cols[0]];
    const std::string& eid = f[cols[1]];
    const std::string& correct = f[cols[2]];
    if (sid.empty() || eid.empty()) throw csv.error("empty id");
    if (correct != "0" && correct != "1") {
      throw csv.error("correct must be 0 or 1, got '" + correct + "'");
    }
    double time = 0.0;
    if (cols[3] >= 0) {
      const std::string& ts = f[cols[3]];
      char* end = nullptr;
      time = std::strtod(ts.c_str(), &end);
      if (ts.empty() || end != ts.c_str() + ts.size() || !std::isfinite(time)) {
        throw csv.error("malformed timestamp '" + ts + "'");
      }
    }
    std::size_t e;
    if (known_exercises) {
      auto found = table.exercises.find(eid);
      if (!found) throw csv.error("unknown exercise '" + eid + "'");
      e = *found;
    } else {
      e = table.exercises.intern(eid);
    }
    rows.push_back({table.students.intern(sid), static_cast<ExerciseId>(e),
                    correct == "1", time, rows.size()});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.student != b.student) return a.student < b.student;
    return a.time < b.time;
  });
  table.logs.resize(table.students.size());
  for (std::size_t s = 0; s < table.logs.size(); ++s) {
    table.logs[s].student = static_cast<StudentId>(s);
  }
  for (const auto& r : rows) table.logs[r.student].append(r.exercise, r.correct);
  return table;
}

QMatrixTable load_qmatrix(const fs::path& path, std::optional<IdMap> exercises,
                          std::optional<IdMap> concepts) {
  CsvReader csv(path);
  const auto cols = csv.header({"exercise_id", "concept_id"});
  QMatrixTable t;
  const bool fixed_e = exercises.has_value();
  const bool fixed_c = concepts.has_value();
  if (fixed_e) t.exercises = std::move(*exercises);
  if (fixed_c) t.concepts = std::move(*concepts);
  std::vector<IncidencePair> pairs;
  std::vector<std::string> f;
  while (csv.row(f)) {
    const std::string& eid = f[cols[0]];
    const std::string& cid = f[cols[1]];
    if (eid.empty() || cid.empty()) throw csv.error("empty id");
    std::optional<std::size_t> e = fixed_e ? t.exercises.find(eid)
                                           : std::optional(t.exercises.intern(eid));
    std::optional<std::size_t> c = fixed_c ? t.concepts.find(cid)
                                           : std::optional(t.concepts.intern(cid));
    if (!e) throw csv.error("unknown exercise '" + eid + "'");
    if (!c) throw csv.error("unknown concept '" + cid + "'");
    pairs.emplace_back(static_cast<ExerciseId>(*e), static_cast<ConceptId>(*c));
  }
  try {
    t.q = QMatrix::build(pairs, t.exercises.size(), t.concepts.size());
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return t;
}

PrerequisiteGraph load_prereqs(const fs::path& path, const IdMap& concepts) {
  CsvReader csv(path);
  const auto cols = csv.header({"prereq_concept", "dependent_concept"});
  std::vector<std::pair<ConceptId, ConceptId>> edges;
  std::vector<std::string> f;
  while (csv.row(f)) {
    auto p = concepts.find(f[cols[0]]);
    auto d = concepts.find(f[cols[1]]);
    if (!p) throw csv.error("unknown concept '" + f[cols[0]] + "'");
    if (!d) throw csv.error("unknown concept '" + f[cols[1]] + "'");
    edges.emplace_back(static_cast<ConceptId>(*p), static_cast<ConceptId>(*d));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  try {
    return PrerequisiteGraph(concepts.size(), std::move(edges));
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset ingest(const fs::path& logs, const fs::path& qmatrix,
               const std::optional<fs::path>& prereqs) {
  QMatrixTable qt = load_qmatrix(qmatrix);
  LogTable lt = load_logs(logs, &qt.exercises);
  Dataset d;
  d.q = std::move(qt.q);
  d.prereqs = prereqs ? load_prereqs(*prereqs, qt.concepts)
                      : PrerequisiteGraph::flat(qt.concepts.size());
  d.logs = std::move(lt.logs);
  d.ids = {std::move(lt.students), std::move(qt.exercises), std::move(qt.concepts)};
  d.validate();
  return d;
}

void write_bundle(const Dataset& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = open_out(dir / "logs.csv");
    out << "student_id,exercise_id,correct,timestamp\n";
    for (const auto& h : d.logs) {
      for (const auto& it : h.items) {
        out << d.ids.students.name(h.student) << ','
            << d.ids.exercises.name(it.exercise) << ',' << (it.correct ? 1 : 0)
            << ',' << it.step << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "qmatrix.csv");
    out << "exercise_id,concept_id\n";
    for (const auto& [e, c] : d.q.pairs()) {
      out << d.ids.exercises.name(e) << ',' << d.ids.concepts.name(c) << '\n';
    }
  }
  {
    auto out = open_out(dir / "prereqs.csv");
    out << "prereq_concept,dependent_concept\n";
    for (const auto& [p, c] : d.prereqs.edges()) {
      out << d.ids.concepts.name(p) << ',' << d.ids.concepts.name(c) << '\n';
    }
  }
  nlohmann::json j;
  j["students"] = d.ids.students.names();
  j["exercises"] = d.ids.exercises.names();
  j["concepts"] = d.ids.concepts.names();
  auto out = open_out(dir / "idmap.json");
  out << j.dump(2) << '\n';
}

Dataset read_bundle(const fs::path& dir) {
  std::ifstream in(dir / "idmap.json");
  if (!in) throw DataError("cannot open " + (dir / "idmap.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "idmap.json").string() + ": " + e.what());
  }
  auto names = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) {
      throw DataError("idmap.json lacks array '" + std::string(key) + "'");
    }
    return IdMap::from_names(j[key].get<std::vector<std::string>>());
  };
  IdMap students = names("students");
  QMatrixTable qt = load_qmatrix(dir / "qmatrix.csv", names("exercises"), names("concepts"));
  LogTable lt = load_logs(dir / "logs.csv", &qt.exercises, students);
  if (lt.students.size() != students.size()) {
    throw DataError("logs.csv mentions students missing from idmap.json");
  }
  Dataset d;
  d.q = std::move(qt.q);
  d.prereqs = load_prereqs(dir / "prereqs.csv", qt.concepts);
  d.logs = std::move(lt.logs);
  d.ids = {std::move(lt.students), std::move(qt.exercises), std::move(qt.concepts)};
  d.validate();
  return d;
}

void SynthConfig::validate() const {
  if (students == 0 || concepts == 0) {
    throw InvalidArgument("synthetic config needs students and concepts");
  }
  if (chain_depth > concepts) throw InvalidArgument("chain_depth exceeds concepts");
  if (exercises < concepts) throw InvalidArgument("exercises must be >= concepts");
  for (const Range* r : {&p_init, &p_learn, &p_guess, &p_slip}) {
    if (!(r->lo > 0.0 && r->lo <= r->hi && r->hi < 1.0)) {
      throw InvalidArgument("parameter ranges must satisfy 0 < lo <= hi < 1");
    }
  }
  if (p_guess.hi + p_slip.hi >= 1.0) {
    throw InvalidArgument("guess and slip ranges allow guess + slip >= 1");
  }
}

BktParams SynthConfig::center_params() const {
  return BktParams::uniform(concepts, p_init.mid(), p_learn.mid(), p_guess.mid(),
                            p_slip.mid());
}

SyntheticPopulation synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticPopulation pop;
  Dataset& d = pop.dataset;
  std::vector<IncidencePair> pairs;
  for (std::size_t e = 0; e < cfg.exercises; ++e) {
    pairs.emplace_back(static_cast<ExerciseId>(e), static_cast<ConceptId>(e % cfg.concepts));
  }
  d.q = QMatrix::build(pairs, cfg.exercises, cfg.concepts);
  d.prereqs = PrerequisiteGraph::chain(cfg.concepts, cfg.chain_depth);
  for (std::size_t c = 0; c < cfg.concepts; ++c) d.ids.concepts.intern("c" + std::to_string(c));
  for (std::size_t e = 0; e < cfg.exercises; ++e) d.ids.exercises.intern("e" + std::to_string(e));

  auto q = std::make_shared<const QMatrix>(d.q);
  auto prereqs = std::make_shared<const PrerequisiteGraph>(d.prereqs);
  pop.students.reserve(cfg.students);
  d.logs.reserve(cfg.students);
  for (std::size_t s = 0; s < cfg.students; ++s) {
    d.ids.students.intern("s" + std::to_string(s));
    Rng rng(derive_seed(cfg.seed, s));
    BktParams params = BktParams::uniform(cfg.concepts, 0, 0, 0, 0);
    for (std::size_t c = 0; c < cfg.concepts; ++c) {
      params.p_init[c] = uniform_real(rng, cfg.p_init.lo, cfg.p_init.hi);
      params.p_learn[c] = uniform_real(rng, cfg.p_learn.lo, cfg.p_learn.hi);
      params.p_guess[c] = uniform_real(rng, cfg.p_guess.lo, cfg.p_guess.hi);
      params.p_slip[c] = uniform_real(rng, cfg.p_slip.lo, cfg.p_slip.hi);
    }
    MasteryVector hidden(params.p_init);
    GroundTruthStudent student(std::move(hidden), std::move(params), prereqs, q, rng());
    History h;
    h.student = static_cast<StudentId>(s);
    for (std::size_t t = 0; t < cfg.log_length; ++t) {
      const auto e = static_cast<ExerciseId>(uniform_index(rng, cfg.exercises));
      h.append(e, student.respond(e));
    }
    d.logs.push_back(std::move(h));
    pop.students.push_back(std::move(student));
  }
  return pop;
}

std::size_t ratio_count(double ratio, std::size_t len) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(len) + 1e-9));
}

Dataset perturb_sparsity(const Dataset& d, double keep_ratio, std::uint64_t seed) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw InvalidArgument("keep ratio must lie in (0, 1]");
  }
  Dataset out = d;
  for (std::size_t s = 0; s < out.logs.size(); ++s) {
    auto& items = out.logs[s].items;
    Rng rng(derive_seed(seed, s));
    const auto keep = sample_without_replacement(items.size(),
                                                 ratio_count(keep_ratio, items.size()), rng);
    std::vector<Interaction> kept;
    kept.reserve(keep.size());
    for (std::size_t i : keep) kept.push_back(items[i]);
    items = std::move(kept);
  }
  return out;
}

Dataset perturb_coldstart(const Dataset& d, std::size_t max_len) {
  if (max_len < 1) throw InvalidArgument("cold-start length must be at least 1");
  Dataset out = d;
  for (auto& h : out.logs) {
    if (h.items.size() > max_len) h.items.resize(max_len);
  }
  return out;
}

Dataset perturb_noise(const Dataset& d, double flip_ratio, std::uint64_t seed,
                      const std::vector<std::size_t>& only_students) {
  if (!(flip_ratio >= 0.0 && flip_ratio <= 1.0)) {
    throw InvalidArgument("flip ratio must lie in [0, 1]");
  }
  Dataset out = d;
  std::vector<bool> selected(out.logs.size(), only_students.empty());
  for (std::size_t s : only_students) {
    if (s < selected.size()) selected[s] = true;
  }
  for (std::size_t s = 0; s < out.logs.size(); ++s) {
    if (!selected[s]) continue;
    auto& items = out.logs[s].items;
    Rng rng(derive_seed(seed, s));
    for (std::size_t i : sample_without_replacement(
             items.size(), ratio_count(flip_ratio, items.size()), rng)) {
      items[i].correct = !items[i].correct;
    }
  }
  return out;
}

}  // namespace unier
