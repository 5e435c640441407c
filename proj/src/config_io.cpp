#include "popcache/config_io.hpp"

#include <fstream>
#include <initializer_list>
#include <span>
#include <string_view>

#include "popcache/errors.hpp"

namespace popcache {

namespace {

using nlohmann::json;

void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
}

void reject_unknown(const json& j, std::span<const std::string_view> allowed, std::string_view where) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  reject_unknown(j, std::span<const std::string_view>(allowed.begin(), allowed.size()), where);
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

// Re-raise validation failures as configuration errors.
template <typename F>
void validated(F&& check, std::string_view where) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

PolicyKind policy_from(const std::string& name) {
  try {
    return parse_policy_kind(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

constexpr std::string_view kRunKeys[] = {"trace", "policy", "capacity", "predictor",
                                                              "refresh_size", "metrics_path", "seed"};

void read_run_fields(const json& j, RunConfig& cfg) {
  if (j.contains("trace")) cfg.trace = trace_spec_from_json(j.at("trace"));
  std::string policy = to_string(cfg.policy);
  read(j, "policy", policy, "run");
  cfg.policy = policy_from(policy);
  read(j, "capacity", cfg.capacity, "run");
  read(j, "refresh_size", cfg.refresh_size, "run");
  read(j, "metrics_path", cfg.metrics_path, "run");
  read(j, "seed", cfg.seed, "run");
  if (j.contains("predictor")) {
    cfg.predictor = predictor_config_from_json(j.at("predictor"));
    if (!j.at("predictor").contains("epoch_duration"))
      if (const auto* synth = std::get_if<SyntheticConfig>(&cfg.trace.source))
        cfg.predictor.epoch_duration = synth->epoch_duration;
  } else if (const auto* synth = std::get_if<SyntheticConfig>(&cfg.trace.source)) {
    cfg.predictor.epoch_duration = synth->epoch_duration;
  }
}

}  // namespace

json to_json(const SyntheticConfig& cfg) {
  return {{"catalogue_size", cfg.catalogue_size}, {"zipf_exponent", cfg.zipf_exponent},
          {"arrival_rate", cfg.arrival_rate},     {"duration", cfg.duration},
          {"epoch_duration", cfg.epoch_duration}, {"class_split", cfg.class_split},
          {"seed", cfg.seed}};
}

SyntheticConfig synthetic_config_from_json(const json& j) {
  constexpr std::string_view where = "synthetic";
  reject_unknown(j,
                 {"catalogue_size", "zipf_exponent", "arrival_rate", "duration", "epoch_duration", "class_split",
                  "seed"},
                 where);
  SyntheticConfig cfg;
  read(j, "catalogue_size", cfg.catalogue_size, where);
  read(j, "zipf_exponent", cfg.zipf_exponent, where);
  read(j, "arrival_rate", cfg.arrival_rate, where);
  read(j, "duration", cfg.duration, where);
  read(j, "epoch_duration", cfg.epoch_duration, where);
  read(j, "class_split", cfg.class_split, where);
  read(j, "seed", cfg.seed, where);
  validated([&] { cfg.validate(); }, where);
  return cfg;
}

json to_json(const PredictorConfig& cfg) {
  return {{"k", cfg.k},
          {"epoch_duration", cfg.epoch_duration},
          {"transform_constant", cfg.transform_constant},
          {"activation_slope", cfg.activation_slope},
          {"learning_rate", cfg.learning_rate},
          {"discount", cfg.discount},
          {"replay_depth", cfg.replay_depth},
          {"batch_size", cfg.batch_size},
          {"validation_fraction", cfg.validation_fraction},
          {"hidden_layers", cfg.hidden_layers},
          {"hidden_width", cfg.hidden_width},
          {"max_samples_per_epoch", cfg.max_samples_per_epoch}};
}

PredictorConfig predictor_config_from_json(const json& j) {
  constexpr std::string_view where = "predictor";
  reject_unknown(j,
                 {"k", "epoch_duration", "transform_constant", "activation_slope", "learning_rate", "discount",
                  "replay_depth", "batch_size", "validation_fraction", "hidden_layers", "hidden_width",
                  "max_samples_per_epoch"},
                 where);
  PredictorConfig cfg;
  read(j, "k", cfg.k, where);
  read(j, "epoch_duration", cfg.epoch_duration, where);
  read(j, "transform_constant", cfg.transform_constant, where);
  read(j, "activation_slope", cfg.activation_slope, where);
  read(j, "learning_rate", cfg.learning_rate, where);
  read(j, "discount", cfg.discount, where);
  read(j, "replay_depth", cfg.replay_depth, where);
  read(j, "batch_size", cfg.batch_size, where);
  read(j, "validation_fraction", cfg.validation_fraction, where);
  read(j, "hidden_layers", cfg.hidden_layers, where);
  read(j, "hidden_width", cfg.hidden_width, where);
  read(j, "max_samples_per_epoch", cfg.max_samples_per_epoch, where);
  validated([&] { cfg.validate(); }, where);
  return cfg;
}

json to_json(const TraceSpec& spec) {
  if (const auto* synth = std::get_if<SyntheticConfig>(&spec.source)) return {{"synthetic", to_json(*synth)}};
  return {{"file", std::get<std::string>(spec.source)}};
}

TraceSpec trace_spec_from_json(const json& j) {
  reject_unknown(j, {"synthetic", "file"}, "trace");
  if (j.contains("synthetic") == j.contains("file"))
    throw ConfigError("trace: exactly one of 'synthetic' or 'file' is required");
  TraceSpec spec;
  if (j.contains("synthetic")) {
    spec.source = synthetic_config_from_json(j.at("synthetic"));
  } else {
    std::string path;
    read(j, "file", path, "trace");
    if (path.empty()) throw ConfigError("trace.file: empty path");
    spec.source = path;
  }
  return spec;
}

json to_json(const RunConfig& cfg) {
  return {{"trace", to_json(cfg.trace)},
          {"policy", to_string(cfg.policy)},
          {"capacity", cfg.capacity},
          {"predictor", to_json(cfg.predictor)},
          {"refresh_size", cfg.refresh_size},
          {"metrics_path", cfg.metrics_path},
          {"seed", cfg.seed}};
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, kRunKeys, "run");
  RunConfig cfg;
  read_run_fields(j, cfg);
  validated([&] { cfg.validate(); }, "run");
  return cfg;
}

std::vector<RunConfig> CompareConfig::expand() const {
  std::vector<RunConfig> out;
  const std::vector<std::size_t> caps = capacities.empty() ? std::vector<std::size_t>{base.capacity} : capacities;
  for (const std::size_t c : caps)
    for (const PolicyKind p : policies) {
      RunConfig rc = base;
      rc.policy = p;
      rc.capacity = c;
      rc.metrics_path.clear();
      out.push_back(rc);
    }
  return out;
}

CompareConfig compare_config_from_json(const json& j) {
  require_object(j, "compare");
  for (const auto& [key, _] : j.items()) {
    bool known = key == "policies" || key == "capacities" || key == "output";
    for (const auto k : kRunKeys) known = known || key == k;
    if (!known) throw ConfigError("compare: unknown key '" + key + "'");
  }
  CompareConfig cfg;
  read_run_fields(j, cfg.base);
  if (j.contains("policies")) {
    std::vector<std::string> names;
    read(j, "policies", names, "compare");
    if (names.empty()) throw ConfigError("compare.policies: empty list");
    cfg.policies.clear();
    for (const auto& n : names) cfg.policies.push_back(policy_from(n));
  }
  read(j, "capacities", cfg.capacities, "compare");
  read(j, "output", cfg.output_path, "compare");
  validated([&] { cfg.base.validate(); }, "compare");
  return cfg;
}

EvalConfig eval_config_from_json(const json& j) {
  reject_unknown(j, {"trace", "predictor", "seed", "output"}, "eval");
  EvalConfig cfg;
  if (j.contains("trace")) cfg.trace = trace_spec_from_json(j.at("trace"));
  read(j, "seed", cfg.seed, "eval");
  read(j, "output", cfg.output_path, "eval");
  if (j.contains("predictor")) cfg.predictor = predictor_config_from_json(j.at("predictor"));
  if (const auto* synth = std::get_if<SyntheticConfig>(&cfg.trace.source))
    if (!j.contains("predictor") || !j.at("predictor").contains("epoch_duration"))
      cfg.predictor.epoch_duration = synth->epoch_duration;
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace popcache
