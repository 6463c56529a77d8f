#include <cmath>
#include <fstream>
#include <sstream>

#include "corral/harness.hpp"
#include "json.hpp"

namespace corral {
namespace {

using nlohmann::json;

const std::vector<std::string> kAlgorithms = {
    "corral_lp",         "corral_gauge",          "mab_recipe",
    "unconstrained_oco", "unconstrained_reduction", "restart_baseline"};

enum class Family { Ball, Arms, Unconstrained };

Family family_of(const std::string& a) {
  if (a == "mab_recipe") return Family::Arms;
  if (is_unconstrained_algorithm(a)) return Family::Unconstrained;
  return Family::Ball;
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + where + it.key() + "'");
  }
}

template <class T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + key + "': " + e.what());
  }
}

template <class T>
void read_opt(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

template <class T>
void read_opt(const json& obj, const char* key, const std::string& where, std::optional<T>& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

}  // namespace

bool is_known_algorithm(const std::string& name) {
  for (const auto& a : kAlgorithms) {
    if (a == name) return true;
  }
  return false;
}

bool is_unconstrained_algorithm(const std::string& name) {
  return name == "unconstrained_oco" || name == "unconstrained_reduction";
}

void ExperimentConfig::validate() const {
  if (algorithms.empty()) throw ConfigError("config needs at least one algorithm");
  for (const auto& a : algorithms) {
    if (!is_known_algorithm(a)) throw ConfigError("unknown algorithm '" + a + "'");
    if (family_of(a) != family_of(algorithms.front())) {
      throw ConfigError("algorithms '" + algorithms.front() + "' and '" + a +
                        "' need different loss families; split the config");
    }
  }
  if (seeds.empty()) throw ConfigError("config needs at least one seed");
  if (run_id.empty() || run_id.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("run_id must be non-empty without commas, quotes or newlines");
  }
  if (loss_file.empty()) env.validate();
  const Family fam = family_of(algorithms.front());
  if (fam == Family::Arms && loss_file.empty() && env.kind != EnvConfig::Kind::BernoulliArms &&
      env.kind != EnvConfig::Kind::Zero) {
    throw ConfigError("mab_recipe needs the bernoulli_arms or zero environment");
  }
  if (fam != Family::Arms && env.kind == EnvConfig::Kind::BernoulliArms) {
    throw ConfigError("bernoulli_arms losses only fit mab_recipe");
  }
  for (const auto& a : algorithms) {
    if (a == "unconstrained_reduction" && env.p != 2.0) {
      throw ConfigError("unconstrained_reduction requires p = 2");
    }
  }
  if (comparator.switches < 0) throw ConfigError("comparator.switches must be >= 0");
  for (double u : comparator.norms) {
    if (!(u >= 0.0) || !std::isfinite(u)) throw ConfigError("comparator norms must be >= 0");
  }
  if (comparator.starts.size() != comparator.anchors.size()) {
    throw ConfigError("comparator.starts and comparator.anchors must have equal length");
  }
  if (!(unconstrained.d_max > 0.0)) throw ConfigError("unconstrained.d_max must be positive");
  if (unconstrained.magnitude != "oco" && unconstrained.magnitude != "frozen") {
    throw ConfigError("unconstrained.magnitude must be 'oco' or 'frozen'");
  }
  if (unconstrained.v_min < 0.0) throw ConfigError("unconstrained.v_min must be >= 0");
  if (gauge.type != "lp" && gauge.type != "ellipsoid") {
    throw ConfigError("gauge.type must be 'lp' or 'ellipsoid'");
  }
  if (!(gauge.alpha > 0.0)) throw ConfigError("gauge.alpha must be positive");
  if (gauge.type == "ellipsoid") {
    if (gauge.shape.empty() == gauge.weights.empty()) {
      throw ConfigError("ellipsoid gauge needs exactly one of gauge.shape or gauge.weights");
    }
    if (!gauge.weights.empty() && static_cast<int>(gauge.weights.size()) != env.d) {
      throw ConfigError("gauge.weights needs one weight per dimension");
    }
    if (!gauge.shape.empty()) {
      if (static_cast<int>(gauge.shape.size()) != env.d) throw ConfigError("gauge.shape must be d x d");
      for (const auto& row : gauge.shape) {
        if (static_cast<int>(row.size()) != env.d) throw ConfigError("gauge.shape must be d x d");
      }
    }
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(root, "",
                 {"run_id", "algorithm", "environment", "comparator", "seeds", "params",
                  "unconstrained", "gauge", "full_trace", "check_invariants", "output"});

  ExperimentConfig cfg;
  read_opt(root, "run_id", "", cfg.run_id);
  if (!root.contains("algorithm")) throw ConfigError("missing key 'algorithm'");
  if (root["algorithm"].is_string()) {
    cfg.algorithms = {root["algorithm"].get<std::string>()};
  } else {
    cfg.algorithms = get_as<std::vector<std::string>>(root, "algorithm", "");
  }

  if (!root.contains("environment")) throw ConfigError("missing section 'environment'");
  const json& env = root["environment"];
  reject_unknown(env, "environment.",
                 {"kind", "d", "T", "S", "p", "noise", "signal", "loss_file"});
  if (env.contains("kind")) cfg.env.kind = parse_env_kind(get_as<std::string>(env, "kind", "environment."));
  read_opt(env, "d", "environment.", cfg.env.d);
  read_opt(env, "T", "environment.", cfg.env.T);
  read_opt(env, "S", "environment.", cfg.env.S);
  read_opt(env, "p", "environment.", cfg.env.p);
  read_opt(env, "noise", "environment.", cfg.env.noise);
  read_opt(env, "signal", "environment.", cfg.env.signal);
  read_opt(env, "loss_file", "environment.", cfg.loss_file);

  if (root.contains("comparator")) {
    const json& c = root["comparator"];
    reject_unknown(c, "comparator.", {"switches", "norms", "starts", "anchors"});
    read_opt(c, "switches", "comparator.", cfg.comparator.switches);
    read_opt(c, "norms", "comparator.", cfg.comparator.norms);
    read_opt(c, "starts", "comparator.", cfg.comparator.starts);
    if (c.contains("anchors")) {
      for (const auto& row : get_as<std::vector<std::vector<double>>>(c, "anchors", "comparator.")) {
        cfg.comparator.anchors.push_back(Eigen::Map<const Vec>(row.data(), row.size()));
      }
    }
  }

  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    if (s.is_array()) {
      cfg.seeds = get_as<std::vector<std::uint64_t>>(root, "seeds", "");
    } else if (s.is_object()) {
      reject_unknown(s, "seeds.", {"first", "count"});
      const auto first = get_as<std::uint64_t>(s, "first", "seeds.");
      const auto count = get_as<int>(s, "count", "seeds.");
      if (count < 1) throw ConfigError("seeds.count must be >= 1");
      cfg.seeds.clear();
      for (int k = 0; k < count; ++k) cfg.seeds.push_back(first + static_cast<std::uint64_t>(k));
    } else {
      throw ConfigError("seeds must be a list or {first, count}");
    }
  }

  if (root.contains("params")) {
    const json& p = root["params"];
    reject_unknown(p, "params.", {"gamma", "eta", "epsilon", "mu", "beta", "lambda", "mab_eta",
                                  "mab_epsilon", "mab_copies"});
    auto& o = cfg.overrides;
    read_opt(p, "gamma", "params.", o.gamma);
    read_opt(p, "eta", "params.", o.eta);
    read_opt(p, "epsilon", "params.", o.epsilon);
    read_opt(p, "mu", "params.", o.mu);
    read_opt(p, "beta", "params.", o.beta);
    read_opt(p, "lambda", "params.", o.lambda);
    read_opt(p, "mab_eta", "params.", o.mab_eta);
    read_opt(p, "mab_epsilon", "params.", o.mab_epsilon);
    read_opt(p, "mab_copies", "params.", o.mab_copies);
  }

  if (root.contains("unconstrained")) {
    const json& u = root["unconstrained"];
    reject_unknown(u, "unconstrained.", {"d_max", "full_grid", "v_min", "magnitude", "frozen_value"});
    read_opt(u, "d_max", "unconstrained.", cfg.unconstrained.d_max);
    read_opt(u, "full_grid", "unconstrained.", cfg.unconstrained.full_grid);
    read_opt(u, "v_min", "unconstrained.", cfg.unconstrained.v_min);
    read_opt(u, "magnitude", "unconstrained.", cfg.unconstrained.magnitude);
    read_opt(u, "frozen_value", "unconstrained.", cfg.unconstrained.frozen_value);
  }

  if (root.contains("gauge")) {
    const json& g = root["gauge"];
    reject_unknown(g, "gauge.", {"type", "alpha", "shape", "weights"});
    read_opt(g, "type", "gauge.", cfg.gauge.type);
    read_opt(g, "alpha", "gauge.", cfg.gauge.alpha);
    read_opt(g, "shape", "gauge.", cfg.gauge.shape);
    read_opt(g, "weights", "gauge.", cfg.gauge.weights);
  }

  read_opt(root, "full_trace", "", cfg.full_trace);
  read_opt(root, "check_invariants", "", cfg.check_invariants);
  read_opt(root, "output", "", cfg.output);

  bool unconstrained = false;
  for (const auto& a : cfg.algorithms) unconstrained = unconstrained || is_unconstrained_algorithm(a);
  cfg.env.unconstrained = unconstrained;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace corral
