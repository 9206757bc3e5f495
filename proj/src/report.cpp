#include "unier/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "unier/error.hpp"

namespace unier {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kColumns = {
    "method",       "variant",      "task",          "k",
    "mean",         "std",          "students",      "per_seed",
    "train_time_s", "infer_time_s", "peak_memory_bytes", "profiled",
    "estimator",    "status",       "hyperparams"};

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_double(v[i]);
  }
  return out;
}

std::string join_params(const ParamSet& p) {
  std::string out;
  for (const auto& [k, v] : p) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_double(v);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& col) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("results.csv: bad number '" + s + "' in column " + col);
  }
  return v;
}

std::size_t parse_size(const std::string& s, const std::string& col) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("results.csv: bad integer '" + s + "' in column " + col);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Splits CSV text into records, honouring quoted fields.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cur.empty()) {
        fields.push_back(std::move(cur));
        records.push_back(std::move(fields));
      }
      fields.clear();
      cur.clear();
      any = false;
    } else {
      cur += c;
      any = true;
    }
  }
  if (quoted) throw DataError("results.csv: unterminated quoted field");
  if (any || !cur.empty()) {
    fields.push_back(std::move(cur));
    records.push_back(std::move(fields));
  }
  return records;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string results_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : rows) {
    const std::vector<std::string> cells = {
        r.method,
        r.variant,
        r.task,
        std::to_string(r.k),
        format_double(r.mean),
        format_double(r.std),
        std::to_string(r.students),
        join_doubles(r.per_seed),
        format_double(r.train_time_s),
        format_double(r.infer_time_s),
        r.peak_memory_bytes ? std::to_string(*r.peak_memory_bytes) : "",
        r.profiled ? "1" : "0",
        r.estimator,
        r.status,
        join_params(r.hyperparams)};
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << quote(cells[i]);
    out << '\n';
  }
  return out.str();
}

std::vector<ReportRow> parse_results_csv(const std::string& text) {
  const auto records = parse_records(text);
  if (records.empty() || records.front() != kColumns) {
    throw DataError("results.csv: missing or unexpected header");
  }
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != kColumns.size()) {
      throw DataError("results.csv: record " + std::to_string(i + 1) + " has " +
                      std::to_string(f.size()) + " fields");
    }
    ReportRow r;
    r.method = f[0];
    r.variant = f[1];
    r.task = f[2];
    r.k = parse_size(f[3], "k");
    r.mean = parse_double(f[4], "mean");
    r.std = parse_double(f[5], "std");
    r.students = parse_size(f[6], "students");
    for (const auto& s : split(f[7], ';')) r.per_seed.push_back(parse_double(s, "per_seed"));
    r.train_time_s = parse_double(f[8], "train_time_s");
    r.infer_time_s = parse_double(f[9], "infer_time_s");
    if (f[10].empty()) {
      r.peak_memory_bytes = std::nullopt;
    } else {
      r.peak_memory_bytes = parse_size(f[10], "peak_memory_bytes");
    }
    r.profiled = f[11] == "1";
    r.estimator = f[12];
    r.status = f[13];
    for (const auto& kv : split(f[14], ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DataError("results.csv: bad hyperparameter '" + kv + "'");
      r.hyperparams[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1), "hyperparams");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_results_csv(ss.str());
}

nlohmann::json results_json(const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["method"] = r.method;
    j["variant"] = r.variant;
    j["task"] = r.task;
    j["k"] = r.k;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["students"] = r.students;
    j["per_seed"] = r.per_seed;
    j["train_time_s"] = r.train_time_s;
    j["infer_time_s"] = r.infer_time_s;
    j["peak_memory_bytes"] =
        r.peak_memory_bytes ? nlohmann::json(*r.peak_memory_bytes) : nlohmann::json(nullptr);
    j["profiled"] = r.profiled;
    j["estimator"] = r.estimator;
    j["status"] = r.status;
    j["hyperparams"] = nlohmann::json::object();
    for (const auto& [k, v] : r.hyperparams) j["hyperparams"][k] = v;
    arr.push_back(std::move(j));
  }
  return {{"rows", arr}};
}

std::vector<ReportRow> rows_from_json(const nlohmann::json& j) {
  std::vector<ReportRow> rows;
  try {
    for (const auto& e : j.at("rows")) {
      ReportRow r;
      r.method = e.at("method").get<std::string>();
      r.variant = e.at("variant").get<std::string>();
      r.task = e.at("task").get<std::string>();
      r.k = e.at("k").get<std::size_t>();
      r.mean = e.at("mean").get<double>();
      r.std = e.at("std").get<double>();
      r.students = e.at("students").get<std::size_t>();
      r.per_seed = e.at("per_seed").get<std::vector<double>>();
      r.train_time_s = e.at("train_time_s").get<double>();
      r.infer_time_s = e.at("infer_time_s").get<double>();
      const auto& mem = e.at("peak_memory_bytes");
      if (mem.is_null()) {
        r.peak_memory_bytes = std::nullopt;
      } else {
        r.peak_memory_bytes = mem.get<std::size_t>();
      }
      r.profiled = e.at("profiled").get<bool>();
      r.estimator = e.at("estimator").get<std::string>();
      r.status = e.at("status").get<std::string>();
      for (const auto& [k, v] : e.at("hyperparams").items()) r.hyperparams[k] = v.get<double>();
      rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("results.json: ") + e.what());
  }
  return rows;
}

std::string results_markdown(const std::vector<ReportRow>& rows) {
  std::vector<std::string> methods, variants;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cell;
  std::size_t k = 0;
  bool any_tga = false, any_gpp = false;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) {
      variants.push_back(r.variant);
    }
    cell[{r.method, r.variant + "\x1f" + r.task}] = &r;
    k = r.k;
    any_tga |= r.task == "TGA";
    any_gpp |= r.task == "GPP";
  }
  std::vector<std::string> columns;
  std::vector<std::string> headers;
  for (const auto& v : variants) {
    for (const std::string t : {"TGA", "GPP"}) {
      if ((t == "TGA" && !any_tga) || (t == "GPP" && !any_gpp)) continue;
      columns.push_back(v + "\x1f" + t);
      headers.push_back(v + " " + t + "@" + std::to_string(k));
    }
  }

  // values[m][c], nullopt for missing or failed cells; the last column is the
  // average over a method's available cells.
  std::vector<std::vector<std::optional<double>>> values(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : columns) {
      const auto it = cell.find({methods[m], c});
      if (it != cell.end() && it->second->status == "ok") {
        values[m].push_back(it->second->mean);
        sum += it->second->mean;
        ++n;
      } else {
        values[m].push_back(std::nullopt);
      }
    }
    values[m].push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
  }
  headers.push_back("Avg.");

  std::vector<std::vector<int>> rank(methods.size(), std::vector<int>(headers.size(), 0));
  for (std::size_t c = 0; c < headers.size(); ++c) {
    std::vector<std::size_t> order;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (values[m][c]) order.push_back(m);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return *values[a][c] > *values[b][c];
    });
    for (std::size_t i = 0; i < order.size() && i < 3; ++i) {
      rank[order[i]][c] = static_cast<int>(i + 1);
    }
  }

  std::ostringstream out;
  out << "# Results\n\n";
  out << "Mean WCG@" << k << " over test students. [1], [2], [3] mark the top three per column.\n\n";
  out << "| Method |";
  for (const auto& h : headers) out << ' ' << h << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < headers.size(); ++i) out << "---:|";
  out << '\n';
  for (std::size_t m = 0; m < methods.size(); ++m) {
    out << "| " << methods[m] << " |";
    for (std::size_t c = 0; c < headers.size(); ++c) {
      if (!values[m][c]) {
        out << " - |";
        continue;
      }
      out << ' ';
      if (rank[m][c] == 1) {
        out << "**" << fixed4(*values[m][c]) << "** [1]";
      } else if (rank[m][c] > 1) {
        out << fixed4(*values[m][c]) << " [" << rank[m][c] << "]";
      } else {
        out << fixed4(*values[m][c]);
      }
      out << " |";
    }
    out << '\n';
  }
  bool failed = false;
  for (const auto& r : rows) failed |= r.status != "ok";
  if (failed) {
    out << "\nFailed rows:\n\n";
    for (const auto& r : rows) {
      if (r.status != "ok") out << "- " << r.method << " / " << r.variant << " / " << r.task << ": " << r.status << '\n';
    }
  }
  return out.str();
}

void write_reports(const std::vector<ReportRow>& rows, const fs::path& dir) {
  if (rows.empty()) throw InvalidArgument("no rows to report");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "results.csv", results_csv(rows));
  write_text(dir / "results.json", results_json(rows).dump(2) + "\n");
  write_text(dir / "report.md", results_markdown(rows));
}

}  // namespace unier
