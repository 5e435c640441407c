#ifndef POPCACHE_CONFIG_IO_HPP
#define POPCACHE_CONFIG_IO_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "popcache/engine.hpp"

namespace popcache {

// JSON mappings for every configuration type. Readers reject unknown keys
// and keep defaults for missing ones; all of them throw ConfigError.

nlohmann::json to_json(const SyntheticConfig& cfg);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PredictorConfig& cfg);
PredictorConfig predictor_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TraceSpec& spec);
TraceSpec trace_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// A run config plus the policies and capacities to sweep.
struct CompareConfig {
  RunConfig base;
  std::vector<PolicyKind> policies{PolicyKind::Fnn, PolicyKind::Lr, PolicyKind::Avg, PolicyKind::Arc,
                                   PolicyKind::Lru};
  std::vector<std::size_t> capacities;  // empty: base.capacity only
  std::string output_path;

  std::vector<RunConfig> expand() const;
};
CompareConfig compare_config_from_json(const nlohmann::json& j);

struct EvalConfig {
  TraceSpec trace;
  PredictorConfig predictor;
  std::uint64_t seed = 1;
  std::string output_path;
};
EvalConfig eval_config_from_json(const nlohmann::json& j);

/// Parses a JSON file; ConfigError on I/O or syntax errors.
nlohmann::json load_json_file(const std::string& path);

}  // namespace popcache

#endif  // POPCACHE_CONFIG_IO_HPP
