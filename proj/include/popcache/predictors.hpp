#ifndef POPCACHE_PREDICTORS_HPP
#define POPCACHE_PREDICTORS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popcache/feature_store.hpp"
#include "popcache/mlp.hpp"
#include "popcache/rng.hpp"

namespace popcache {

enum class PredictorKind { Fnn, Lr, Avg };

std::string to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(const std::string& name);

struct PredictorConfig {
  std::size_t k = 4;              // epochs per feature vector
  double epoch_duration = 200.0;  // T, seconds
  double transform_constant = 1e-15;
  double activation_slope = 1e-2;
  double learning_rate = 1e-4;
  double discount = 0.5;          // gamma
  std::size_t replay_depth = 9;   // H
  std::size_t batch_size = 8;
  double validation_fraction = 0.1;
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 128;
  std::size_t max_samples_per_epoch = 200000;

  void validate() const;

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

/// F(p) = -ln(p + c).
inline double transform(double p, double c) { return -std::log(p + c); }
/// F^-1(y) = max(0, e^-y - c).
double inverse_transform(double y, double c);

/// [t/T, F(p_-(K-1)), ..., F(p_0)]. Throws std::invalid_argument if t is outside [0, T].
std::vector<double> build_input(std::span<const double> features, double t, const PredictorConfig& cfg);
void build_input_into(std::span<const double> features, double t, const PredictorConfig& cfg,
                      std::vector<double>& out);

/// Resolved training samples of one epoch, stored row-major, with a fixed
/// train/holdout split.
class EpochDataset {
 public:
  EpochDataset() = default;
  EpochDataset(std::uint64_t epoch, std::size_t input_dim) : epoch_(epoch), input_dim_(input_dim) {}

  void add(std::span<const double> input, double target);
  /// Marks a deterministic random `fraction` of the samples as holdout.
  void split_holdout(double fraction, Rng& rng);

  std::uint64_t epoch() const { return epoch_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }

  std::span<const double> input(std::size_t i) const {
    return {inputs_.data() + i * input_dim_, input_dim_};
  }
  double target(std::size_t i) const { return targets_[i]; }

  const std::vector<std::size_t>& train_indices() const { return train_; }
  const std::vector<std::size_t>& holdout_indices() const { return holdout_; }

 private:
  std::uint64_t epoch_ = 0;
  std::size_t input_dim_ = 0;
  std::vector<double> inputs_;
  std::vector<double> targets_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> holdout_;
};

/// One pending sample per processed request; targets are filled in when the
/// epoch closes.
class SampleCollector {
 public:
  explicit SampleCollector(const PredictorConfig& cfg) : cfg_(cfg) {}

  void collect(ContentId id, std::span<const double> features, double t);

  /// Builds the dataset of the closed epoch with target F(final popularity).
  EpochDataset resolve(const FinalizedEpoch& finalized, Rng& rng);

  std::size_t pending() const { return pending_.size(); }

 private:
  struct Pending {
    ContentId id;
    std::vector<double> input;
  };

  PredictorConfig cfg_;
  std::deque<Pending> pending_;
};

/// The newest epoch dataset plus up to H older ones, newest first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t replay_depth) : depth_(replay_depth) {}

  void push(EpochDataset dataset);

  std::size_t size() const { return datasets_.size(); }
  bool empty() const { return datasets_.empty(); }
  /// i = 0 is the most recent epoch.
  const EpochDataset& at(std::size_t i) const { return datasets_.at(i); }

 private:
  std::size_t depth_;
  std::deque<EpochDataset> datasets_;
};

class Predictor {
 public:
  explicit Predictor(const PredictorConfig& cfg) : cfg_(cfg) {}
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;

  /// Estimate in transformed space for an input built by build_input.
  virtual double transformed_output(std::span<const double> input) const = 0;

  /// Estimated current popularity in [0, 1].
  virtual double predict(ContentId id, std::span<const double> features, double t) const;

  virtual bool trainable() const { return false; }

  /// One SGD step on the given samples. Returns the batch loss before the step.
  virtual double train_batch(const EpochDataset& /*data*/, std::span<const std::size_t> /*rows*/,
                             double /*lr*/) {
    return 0.0;
  }

  /// Saves the trainable state; rollback() restores it after a diverged pass.
  virtual void snapshot() {}
  virtual void rollback() {}
  virtual bool parameters_finite() const { return true; }

  const PredictorConfig& config() const { return cfg_; }

 protected:
  PredictorConfig cfg_;
};

/// FNN (leaky ReLU hidden layers) or LR (same layers, activations removed).
class NetworkPredictor final : public Predictor {
 public:
  NetworkPredictor(const PredictorConfig& cfg, bool activations, std::uint64_t seed);
  NetworkPredictor(const PredictorConfig& cfg, Mlp net);

  std::string name() const override { return activations_ ? "fnn" : "lr"; }
  double transformed_output(std::span<const double> input) const override;
  bool trainable() const override { return true; }
  double train_batch(const EpochDataset& data, std::span<const std::size_t> rows, double lr) override;
  void snapshot() override { saved_ = net_; }
  void rollback() override;
  bool parameters_finite() const override;

  const Mlp& network() const { return net_; }

 private:
  Mlp net_;
  std::optional<Mlp> saved_;
  bool activations_;
};

/// Arithmetic mean of the K feature popularities (current partial one included).
class AveragePredictor final : public Predictor {
 public:
  using Predictor::Predictor;

  std::string name() const override { return "avg"; }
  double transformed_output(std::span<const double> input) const override;
  double predict(ContentId id, std::span<const double> features, double t) const override;
};

std::unique_ptr<Predictor> make_predictor(PredictorKind kind, const PredictorConfig& cfg, std::uint64_t seed);

struct TrainingReport {
  std::vector<double> dataset_loss;  // mean minibatch loss per replayed dataset, newest first
  double validation_loss = 0.0;      // holdout MSE of the newest dataset after training
  bool has_validation = false;
  std::vector<double> batch_losses;  // every minibatch, in training order
  std::size_t diverged_passes = 0;   // passes undone because the parameters stopped being finite
};

/// Replays the buffer newest-first: dataset i is shuffled and trained in
/// minibatches with learning rate gamma^i * eta. A pass that drives the
/// parameters to inf/NaN is rolled back and reported with a NaN loss.
/// No-op for untrainable predictors.
TrainingReport train_epoch_end(Predictor& pred, const ReplayBuffer& replay, Rng& rng);

/// Mean squared error in transformed space. Throws UndefinedResultError on no samples.
double eval_mse(const Predictor& pred, const EpochDataset& data);
double eval_mse(const Predictor& pred, const EpochDataset& data, std::span<const std::size_t> rows);

/// Network parameters plus the predictor configuration.
nlohmann::json checkpoint(const NetworkPredictor& pred);
NetworkPredictor restore_checkpoint(const nlohmann::json& j);

}  // namespace popcache

#endif  // POPCACHE_PREDICTORS_HPP
