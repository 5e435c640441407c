#ifndef POPCACHE_ENGINE_HPP
#define POPCACHE_ENGINE_HPP

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "popcache/policies.hpp"
#include "popcache/predictors.hpp"
#include "popcache/trace.hpp"

namespace popcache {

/// Where requests come from: a synthetic generator or a CSV trace file.
struct TraceSpec {
  std::variant<SyntheticConfig, std::string> source = SyntheticConfig{};

  bool is_synthetic() const { return std::holds_alternative<SyntheticConfig>(source); }

  friend bool operator==(const TraceSpec&, const TraceSpec&) = default;
};

/// Opens a fresh, rewound event stream for the spec.
std::unique_ptr<EventSource> open_trace(const TraceSpec& spec);

/// TraceReader that owns its file.
class FileTraceSource final : public EventSource {
 public:
  explicit FileTraceSource(const std::string& path);
  std::optional<RequestEvent> next() override { return reader_.next(); }

 private:
  std::ifstream file_;
  TraceReader reader_;
};

struct RunConfig {
  TraceSpec trace;
  PolicyKind policy = PolicyKind::Fnn;
  std::size_t capacity = 100;
  PredictorConfig predictor;
  std::size_t refresh_size = 2;
  std::string metrics_path;  // CSV; the JSON summary goes next to it
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochMetrics {
  std::uint64_t epoch = 0;
  std::uint64_t requests = 0;
  std::uint64_t hits = 0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();       // newest-dataset training loss
  double val_mse = std::numeric_limits<double>::quiet_NaN();         // holdout loss after training
  double prediction_mse = std::numeric_limits<double>::quiet_NaN();  // whole epoch, before training on it

  double hit_rate() const { return requests ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0; }
};

struct Metrics {
  std::string policy;
  std::size_t capacity = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::vector<EpochMetrics> epochs;
  std::vector<double> loss_curve;  // one entry per training minibatch
  std::size_t diverged_passes = 0;  // replay passes rolled back after inf/NaN
  double wall_seconds = 0.0;

  std::uint64_t requests() const { return hits + misses; }
  double hit_rate() const;
  /// Mean over epochs after the first that have a value; NaN if there are none.
  double mean_post_warmup_prediction_mse() const;
  double mean_post_warmup_validation_mse() const;
  /// Hit rate over epochs after the first.
  double post_warmup_hit_rate() const;
};

struct SimulationOptions {
  /// Replaces the predictor implied by the policy (popularity policies only).
  std::shared_ptr<Predictor> predictor;
  bool train = true;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Drives `source` through feature store, predictor and policy.
Metrics simulate(EventSource& source, const RunConfig& cfg, const SimulationOptions& opts = {});

/// Opens cfg.trace and simulates it; writes metrics files if cfg.metrics_path is set.
Metrics run(const RunConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct ComparisonRow {
  std::string policy;
  std::size_t capacity = 0;
  double hit_rate = 0.0;
  double post_warmup_hit_rate = 0.0;
  double prediction_mse = std::numeric_limits<double>::quiet_NaN();
};

/// Runs every config on the same regenerated event stream. Throws
/// std::invalid_argument if the configs do not share trace and seed.
std::vector<ComparisonRow> compare(const std::vector<RunConfig>& cfgs, std::size_t max_threads = 0);

struct PredictorScore {
  std::string predictor;
  double prediction_mse = 0.0;  // mean post-warmup per-epoch MSE, transformed space
  double validation_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_epoch;
};

/// Trains FNN and LR online over the trace (no cache) and scores all three
/// predictors. Throws UndefinedResultError for traces shorter than two epochs.
std::vector<PredictorScore> eval_predictors(const TraceSpec& trace, const PredictorConfig& cfg, std::uint64_t seed,
                                            std::size_t max_threads = 0);

struct CurvePoint {
  std::size_t iteration = 0;
  double train_loss = 0.0;  // mean minibatch loss since the previous point
  double val_mse = 0.0;
};

/// Offline learning curve: collects the dataset of epoch `epoch` from the
/// trace, then trains a fresh predictor on it minibatch by minibatch and
/// measures holdout MSE every `eval_every` iterations (and at iteration 0).
std::vector<CurvePoint> learning_curve(const TraceSpec& trace, const PredictorConfig& cfg, PredictorKind kind,
                                       std::uint64_t seed, std::size_t iterations, std::size_t eval_every,
                                       std::uint64_t epoch = 1);

void write_metrics_csv(std::ostream& out, const Metrics& m);
nlohmann::json summary_json(const Metrics& m, const RunConfig& cfg);
/// Writes `<stem>.csv`-style metrics to cfg.metrics_path and the summary to
/// the same path with a .json extension, both atomically.
void write_metrics_files(const Metrics& m, const RunConfig& cfg);
std::string summary_path_for(const std::string& metrics_path);

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);
void write_scores_csv(std::ostream& out, const std::vector<PredictorScore>& scores);

}  // namespace popcache

#endif  // POPCACHE_ENGINE_HPP
