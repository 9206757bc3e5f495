#include "unier/serialize.hpp"

#include <fstream>
#include <string>

#include "unier/error.hpp"

namespace unier {

namespace {

using nlohmann::json;

Features features_from(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != kFeatureDim) {
    throw DataError(std::string("agent document needs a ") +
                    std::to_string(kFeatureDim) + "-element '" + key + "' array");
  }
  Features f{};
  for (std::size_t i = 0; i < kFeatureDim; ++i) f[i] = j[key][i].get<double>();
  return f;
}

void expect_kind(const json& j, const char* kind) {
  if (j.value("kind", std::string()) != kind) {
    throw DataError(std::string("expected an agent document of kind '") + kind + "'");
  }
  if (j.value("feature_dim", std::size_t{0}) != kFeatureDim) {
    throw DataError("agent feature dimension does not match this build");
  }
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSON document: ") + e.what());
  }
}

}  // namespace

json to_json(const BktParams& p) {
  return json{{"num_concepts", p.size()},
              {"p_init", p.p_init},
              {"p_learn", p.p_learn},
              {"p_guess", p.p_guess},
              {"p_slip", p.p_slip}};
}

BktParams bkt_params_from_json(const json& j) {
  return guarded([&] {
    BktParams p{j.at("p_init").get<std::vector<double>>(),
                j.at("p_learn").get<std::vector<double>>(),
                j.at("p_guess").get<std::vector<double>>(),
                j.at("p_slip").get<std::vector<double>>()};
    if (j.contains("num_concepts") && j["num_concepts"].get<std::size_t>() != p.size()) {
      throw DataError("num_concepts disagrees with parameter arrays");
    }
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }
    return p;
  });
}

json to_json(const LinearQ& a) {
  return json{{"kind", "linear_q"},          {"feature_dim", kFeatureDim},
              {"weights", a.weights},        {"alpha", a.alpha},
              {"gamma", a.gamma},            {"epsilon_start", a.epsilon_start},
              {"epsilon_end", a.epsilon_end}, {"decay_fraction", a.decay_fraction},
              {"threshold", a.threshold}};
}

LinearQ linear_q_from_json(const json& j) {
  return guarded([&] {
    expect_kind(j, "linear_q");
    LinearQ a;
    a.weights = features_from(j, "weights");
    a.alpha = j.at("alpha").get<double>();
    a.gamma = j.at("gamma").get<double>();
    a.epsilon_start = j.at("epsilon_start").get<double>();
    a.epsilon_end = j.at("epsilon_end").get<double>();
    a.decay_fraction = j.at("decay_fraction").get<double>();
    a.threshold = j.at("threshold").get<double>();
    return a;
  });
}

json to_json(const SoftmaxPolicy& p) {
  return json{{"kind", "softmax_policy"}, {"feature_dim", kFeatureDim},
              {"actor", p.actor},         {"critic", p.critic},
              {"actor_step", p.actor_step}, {"critic_step", p.critic_step},
              {"gamma", p.gamma},         {"threshold", p.threshold}};
}

SoftmaxPolicy softmax_policy_from_json(const json& j) {
  return guarded([&] {
    expect_kind(j, "softmax_policy");
    SoftmaxPolicy p;
    p.actor = features_from(j, "actor");
    p.critic = features_from(j, "critic");
    p.actor_step = j.at("actor_step").get<double>();
    p.critic_step = j.at("critic_step").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.threshold = j.at("threshold").get<double>();
    return p;
  });
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace unier
