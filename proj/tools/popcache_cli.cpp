// popcache: command-line front end for trace generation, cache simulation,
// policy comparison and predictor evaluation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "popcache/atomic_file.hpp"
#include "popcache/config_io.hpp"
#include "popcache/engine.hpp"
#include "popcache/errors.hpp"
#include "popcache/trace.hpp"

namespace {

using namespace popcache;

constexpr int kExitConfig = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> policy;
  std::optional<std::size_t> capacity;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 0;
  bool progress = false;
};

void print_epoch(const EpochMetrics& e) {
  std::fprintf(stderr, "epoch %llu: requests=%llu hits=%llu hit_rate=%.4f train_mse=%.4f val_mse=%.4f\n",
               static_cast<unsigned long long>(e.epoch), static_cast<unsigned long long>(e.requests),
               static_cast<unsigned long long>(e.hits), e.hit_rate(), e.train_mse, e.val_mse);
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  if (auto* synth = std::get_if<SyntheticConfig>(&cfg.trace.source)) synth->seed = seed;
}

int cmd_gen_trace(const Overrides& o) {
  SyntheticConfig cfg = synthetic_config_from_json(load_json_file(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out) throw ConfigError("gen-trace: --out is required");
  SyntheticTrace trace(cfg);
  std::ostringstream buf;
  const std::size_t n = write_trace(buf, trace);
  write_file_atomically(*o.out, buf.str());
  std::fprintf(stderr, "wrote %zu events to %s\n", n, o.out->c_str());
  return 0;
}

int cmd_run(const Overrides& o) {
  RunConfig cfg = run_config_from_json(load_json_file(o.config));
  if (o.policy) cfg.policy = parse_policy_kind(*o.policy);
  if (o.capacity) cfg.capacity = *o.capacity;
  if (o.seed) apply_seed(cfg, *o.seed);
  if (o.out) cfg.metrics_path = *o.out;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const Metrics m = run(cfg, o.progress ? print_epoch : std::function<void(const EpochMetrics&)>{});
  std::cout << summary_json(m, cfg).dump(2) << '\n';
  return 0;
}

int cmd_compare(const Overrides& o) {
  CompareConfig cfg = compare_config_from_json(load_json_file(o.config));
  if (o.policy) cfg.policies = {parse_policy_kind(*o.policy)};
  if (o.capacity) cfg.capacities = {*o.capacity};
  if (o.seed) apply_seed(cfg.base, *o.seed);
  if (o.out) cfg.output_path = *o.out;
  const auto rows = compare(cfg.expand(), o.threads);
  std::ostringstream csv;
  write_comparison_csv(csv, rows);
  if (!cfg.output_path.empty()) write_file_atomically(cfg.output_path, csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_eval(const Overrides& o) {
  EvalConfig cfg = eval_config_from_json(load_json_file(o.config));
  if (o.seed) {
    cfg.seed = *o.seed;
    if (auto* synth = std::get_if<SyntheticConfig>(&cfg.trace.source)) synth->seed = *o.seed;
  }
  if (o.out) cfg.output_path = *o.out;
  const auto scores = eval_predictors(cfg.trace, cfg.predictor, cfg.seed, o.threads);
  std::ostringstream csv;
  write_scores_csv(csv, scores);
  if (!cfg.output_path.empty()) write_file_atomically(cfg.output_path, csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven cache simulator with popularity-prediction caching"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output path");
    sub->add_option("--seed", o.seed, "seed override");
  };

  auto* gen = app.add_subcommand("gen-trace", "Write a synthetic trace as time,content_id CSV");
  add_common(gen);

  auto* run = app.add_subcommand("run", "Simulate one policy; writes per-epoch CSV and a JSON summary");
  add_common(run);
  run->add_option("--policy", o.policy, "fnn | lr | avg | lru | arc");
  run->add_option("--capacity", o.capacity, "cache capacity in contents");
  run->add_flag("--progress", o.progress, "per-epoch summaries on stderr");

  auto* cmp = app.add_subcommand("compare", "Run several policies on the same trace");
  add_common(cmp);
  cmp->add_option("--policy", o.policy, "restrict to one policy");
  cmp->add_option("--capacity", o.capacity, "single capacity override");
  cmp->add_option("--threads", o.threads, "worker threads (0 = hardware concurrency)");

  auto* eval = app.add_subcommand("eval-predictors", "Transformed-space MSE of the FNN, LR and AVG predictors");
  add_common(eval);
  eval->add_option("--threads", o.threads, "worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_trace(o);
    if (*run) return cmd_run(o);
    if (*cmp) return cmd_compare(o);
    if (*eval) return cmd_eval(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitUsage;
}
