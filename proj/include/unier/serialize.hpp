#pragma once

// JSON documents for estimator parameters and trained agents.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "unier/pler.hpp"
#include "unier/simulator.hpp"

namespace unier {

// {"num_concepts": n, "p_init": [...], "p_learn": [...], "p_guess": [...],
//  "p_slip": [...]}, arrays indexed by concept.
nlohmann::json to_json(const BktParams& p);
BktParams bkt_params_from_json(const nlohmann::json& j);

// {"kind": "linear_q", "feature_dim": 5, "weights": [...], hyperparameters}
nlohmann::json to_json(const LinearQ& agent);
LinearQ linear_q_from_json(const nlohmann::json& j);

// {"kind": "softmax_policy", "feature_dim": 5, "actor": [...],
//  "critic": [...], hyperparameters}
nlohmann::json to_json(const SoftmaxPolicy& policy);
SoftmaxPolicy softmax_policy_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace unier
