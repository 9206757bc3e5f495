#pragma once

// Bounded random hyperparameter search.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace unier {

using ParamSet = std::map<std::string, double>;

struct ParamDomain {
  std::string name;
  // Discrete domain when non-empty; otherwise the range [lo, hi].
  std::vector<double> choices;
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
  bool integer = false;

  bool discrete() const { return !choices.empty(); }
};

struct SearchSpace {
  std::vector<ParamDomain> params;
  std::size_t trial_budget = 20;
  double wall_clock_seconds = 86400.0;

  void validate() const;
};

struct Trial {
  ParamSet params;
  std::optional<double> objective;
  std::string error;
};

struct SearchResult {
  ParamSet best;
  double best_objective = 0.0;
  std::size_t best_trial = 0;
  std::vector<Trial> trials;
};

using Objective = std::function<double(const ParamSet&)>;

// Runs at most trial_budget trials and starts no trial once the wall-clock
// budget is spent. Fully discrete spaces are sampled without replacement,
// so a space smaller than the budget is enumerated exactly once. A trial
// whose objective throws is recorded and skipped. Returns the highest
// objective, ties by earlier trial. Throws Error if no trial completed.
SearchResult random_search(const SearchSpace& space, const Objective& objective,
                           std::uint64_t seed);

}  // namespace unier
