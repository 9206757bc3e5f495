#pragma once

// results.csv, results.json and report.md writers.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unier/harness.hpp"

namespace unier {

// Shortest representation that round-trips to the same double.
std::string format_double(double v);

std::string results_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_results_csv(const std::string& text);
std::vector<ReportRow> read_results_csv(const std::filesystem::path& path);

nlohmann::json results_json(const std::vector<ReportRow>& rows);
// Inverse of results_json. Throws DataError on a malformed document.
std::vector<ReportRow> rows_from_json(const nlohmann::json& j);

// One line per method, a TGA@k and GPP@k column per variant, and an average
// column. The top three entries of each column carry a marker.
std::string results_markdown(const std::vector<ReportRow>& rows);

// Writes all three files into dir.
void write_reports(const std::vector<ReportRow>& rows, const std::filesystem::path& dir);

}  // namespace unier
