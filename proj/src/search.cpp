#include "unier/search.hpp"

#include <chrono>
#include <cmath>

#include "unier/error.hpp"
#include "unier/random.hpp"

namespace unier {

namespace {

constexpr double kEnumerationLimit = 1e6;

ParamSet decode(const SearchSpace& space, std::size_t code) {
  ParamSet p;
  for (const auto& d : space.params) {
    p[d.name] = d.choices[code % d.choices.size()];
    code /= d.choices.size();
  }
  return p;
}

ParamSet draw(const SearchSpace& space, Rng& rng) {
  ParamSet p;
  for (const auto& d : space.params) {
    double v;
    if (d.discrete()) {
      v = d.choices[uniform_index(rng, d.choices.size())];
    } else if (d.log_scale) {
      v = std::exp(uniform_real(rng, std::log(d.lo), std::log(d.hi)));
    } else {
      v = uniform_real(rng, d.lo, d.hi);
    }
    if (d.integer) v = std::round(v);
    p[d.name] = v;
  }
  return p;
}

}  // namespace

void SearchSpace::validate() const {
  if (trial_budget == 0 || !(wall_clock_seconds > 0.0)) {
    throw InvalidArgument("search budgets must be positive");
  }
  for (const auto& d : params) {
    if (d.name.empty()) throw InvalidArgument("search parameter without a name");
    if (!d.discrete()) {
      if (!(d.lo <= d.hi) || !std::isfinite(d.lo) || !std::isfinite(d.hi)) {
        throw InvalidArgument("search range for '" + d.name + "' is invalid");
      }
      if (d.log_scale && !(d.lo > 0.0)) {
        throw InvalidArgument("log-scale range for '" + d.name + "' must be positive");
      }
    }
  }
}

SearchResult random_search(const SearchSpace& space, const Objective& objective,
                           std::uint64_t seed) {
  space.validate();
  Rng rng(seed);

  bool all_discrete = true;
  double size = 1.0;
  for (const auto& d : space.params) {
    all_discrete = all_discrete && d.discrete();
    if (d.discrete()) size *= static_cast<double>(d.choices.size());
  }

  std::vector<ParamSet> plan;
  if (all_discrete && size <= kEnumerationLimit) {
    std::vector<std::size_t> codes(static_cast<std::size_t>(size));
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = i;
    shuffle(codes, rng);
    if (codes.size() > space.trial_budget) codes.resize(space.trial_budget);
    for (std::size_t c : codes) plan.push_back(decode(space, c));
  } else {
    for (std::size_t i = 0; i < space.trial_budget; ++i) plan.push_back(draw(space, rng));
  }

  SearchResult result;
  std::optional<std::size_t> best;
  const auto start = std::chrono::steady_clock::now();
  for (auto& params : plan) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed >= space.wall_clock_seconds) break;
    Trial t{std::move(params), std::nullopt, {}};
    try {
      const double v = objective(t.params);
      if (std::isfinite(v)) {
        t.objective = v;
      } else {
        t.error = "objective is not finite";
      }
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    if (t.objective && (!best || *t.objective > *result.trials[*best].objective)) {
      best = result.trials.size();
    }
    result.trials.push_back(std::move(t));
  }
  if (!best) throw Error("random search completed no trial within budget");
  result.best_trial = *best;
  result.best = result.trials[*best].params;
  result.best_objective = *result.trials[*best].objective;
  return result;
}

}  // namespace unier
