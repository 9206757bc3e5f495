#pragma once

// Named acceptance fixtures. Each criterion checks the library against an
// independent reference computation and reports one pass/fail line.

#include <string>
#include <vector>

namespace unier::repro {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  // Zero when the criterion has no runtime bound.
  double limit_seconds = 0.0;
};

struct Fixture {
  std::string name;
  std::string description;
  std::vector<int> criteria;
};

// Every named fixture, including "all".
const std::vector<Fixture>& fixtures();

CriterionResult run_criterion(int id);

// Throws InvalidArgument for an unknown fixture name.
std::vector<CriterionResult> run_fixture(const std::string& name);

// "[PASS] 4 <title> (12.3 s < 60 s): <detail>"
std::string format_result(const CriterionResult& r);

}  // namespace unier::repro
