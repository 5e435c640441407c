#include "popcache/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "popcache/config_io.hpp"
#include "popcache/errors.hpp"

namespace popcache {

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::Fnn: return "fnn";
    case PredictorKind::Lr: return "lr";
    case PredictorKind::Avg: return "avg";
  }
  return "?";
}

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "fnn") return PredictorKind::Fnn;
  if (name == "lr") return PredictorKind::Lr;
  if (name == "avg") return PredictorKind::Avg;
  throw std::invalid_argument("unknown predictor '" + name + "'");
}

void PredictorConfig::validate() const {
  if (k < 1) throw std::invalid_argument("predictor: k must be >= 1");
  if (!(epoch_duration > 0.0)) throw std::invalid_argument("predictor: epoch_duration must be > 0");
  if (!(transform_constant > 0.0)) throw std::invalid_argument("predictor: transform_constant must be > 0");
  if (!(activation_slope >= 0.0)) throw std::invalid_argument("predictor: activation_slope must be >= 0");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("predictor: learning_rate must be >= 0");
  if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("predictor: discount must lie in [0, 1]");
  if (batch_size < 1) throw std::invalid_argument("predictor: batch_size must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("predictor: validation_fraction must lie in [0, 1)");
  if (hidden_width < 1) throw std::invalid_argument("predictor: hidden_width must be >= 1");
  if (max_samples_per_epoch < 1) throw std::invalid_argument("predictor: max_samples_per_epoch must be >= 1");
}

double inverse_transform(double y, double c) {
  const double p = std::exp(-y) - c;
  if (std::isnan(p)) return 0.0;
  return std::max(0.0, p);
}

void build_input_into(std::span<const double> features, double t, const PredictorConfig& cfg,
                      std::vector<double>& out) {
  if (!(t >= 0.0 && t <= cfg.epoch_duration))
    throw std::invalid_argument("build_input: t must lie in [0, T]");
  if (features.size() != cfg.k) throw ShapeError("build_input: expected K features");
  out.resize(cfg.k + 1);
  out[0] = t / cfg.epoch_duration;
  for (std::size_t i = 0; i < cfg.k; ++i) out[i + 1] = transform(features[i], cfg.transform_constant);
}

std::vector<double> build_input(std::span<const double> features, double t, const PredictorConfig& cfg) {
  std::vector<double> out;
  build_input_into(features, t, cfg, out);
  return out;
}

void EpochDataset::add(std::span<const double> input, double target) {
  if (input.size() != input_dim_) throw ShapeError("EpochDataset: sample has the wrong input length");
  inputs_.insert(inputs_.end(), input.begin(), input.end());
  targets_.push_back(target);
  train_.push_back(targets_.size() - 1);
}

void EpochDataset::split_holdout(double fraction, Rng& rng) {
  std::vector<std::size_t> order(size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_holdout = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
  holdout_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  train_.assign(order.begin() + static_cast<std::ptrdiff_t>(n_holdout), order.end());
  std::sort(holdout_.begin(), holdout_.end());
  std::sort(train_.begin(), train_.end());
}

void SampleCollector::collect(ContentId id, std::span<const double> features, double t) {
  Pending p{id, {}};
  build_input_into(features, t, cfg_, p.input);
  pending_.push_back(std::move(p));
  if (pending_.size() > cfg_.max_samples_per_epoch) pending_.pop_front();
}

EpochDataset SampleCollector::resolve(const FinalizedEpoch& finalized, Rng& rng) {
  EpochDataset data(finalized.epoch(), cfg_.k + 1);
  for (const Pending& p : pending_)
    data.add(p.input, transform(finalized.popularity(p.id), cfg_.transform_constant));
  pending_.clear();
  data.split_holdout(cfg_.validation_fraction, rng);
  return data;
}

void ReplayBuffer::push(EpochDataset dataset) {
  datasets_.push_front(std::move(dataset));
  while (datasets_.size() > depth_ + 1) datasets_.pop_back();
}

double Predictor::predict(ContentId /*id*/, std::span<const double> features, double t) const {
  const std::vector<double> input = build_input(features, t, cfg_);
  const double p = inverse_transform(transformed_output(input), cfg_.transform_constant);
  return std::min(p, 1.0);
}

NetworkPredictor::NetworkPredictor(const PredictorConfig& cfg, bool activations, std::uint64_t seed)
    : Predictor(cfg), net_([&] {
        cfg.validate();
        std::vector<std::size_t> dims{cfg.k + 1};
        for (std::size_t l = 0; l < cfg.hidden_layers; ++l) dims.push_back(cfg.hidden_width);
        dims.push_back(1);
        return Mlp::glorot(dims, seed, cfg.activation_slope, activations);
      }()),
      activations_(activations) {}

NetworkPredictor::NetworkPredictor(const PredictorConfig& cfg, Mlp net)
    : Predictor(cfg), net_(std::move(net)), activations_(false) {
  cfg.validate();
  if (net_.input_dim() != cfg.k + 1 || net_.output_dim() != 1)
    throw ShapeError("NetworkPredictor: network shape does not match K");
  for (const auto& layer : net_.layers()) activations_ = activations_ || layer.activated;
}

double NetworkPredictor::transformed_output(std::span<const double> input) const {
  return forward_scalar(net_, input);
}

double NetworkPredictor::train_batch(const EpochDataset& data, std::span<const std::size_t> rows, double lr) {
  const auto dim = static_cast<Eigen::Index>(data.input_dim());
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(rows.size()));
  Eigen::MatrixXd y(1, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto in = data.input(rows[j]);
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(in.data(), dim);
    y(0, static_cast<Eigen::Index>(j)) = data.target(rows[j]);
  }
  ForwardCache cache;
  forward(net_, x, &cache);
  const double loss = (cache.output - y).squaredNorm() / static_cast<double>(rows.size());
  sgd_step(net_, backward(net_, cache, y), lr);
  return loss;
}

void NetworkPredictor::rollback() {
  if (saved_) net_ = *saved_;
}

bool NetworkPredictor::parameters_finite() const {
  for (const auto& layer : net_.layers())
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

double AveragePredictor::transformed_output(std::span<const double> input) const {
  if (input.size() != cfg_.k + 1) throw ShapeError("AveragePredictor: expected K+1 inputs");
  double sum = 0.0;
  for (std::size_t i = 1; i < input.size(); ++i) sum += inverse_transform(input[i], cfg_.transform_constant);
  return transform(sum / static_cast<double>(cfg_.k), cfg_.transform_constant);
}

double AveragePredictor::predict(ContentId /*id*/, std::span<const double> features, double /*t*/) const {
  if (features.size() != cfg_.k) throw ShapeError("AveragePredictor: expected K features");
  double sum = 0.0;
  for (const double p : features) sum += p;
  return std::clamp(sum / static_cast<double>(cfg_.k), 0.0, 1.0);
}

std::unique_ptr<Predictor> make_predictor(PredictorKind kind, const PredictorConfig& cfg, std::uint64_t seed) {
  switch (kind) {
    case PredictorKind::Fnn: return std::make_unique<NetworkPredictor>(cfg, true, seed);
    case PredictorKind::Lr: return std::make_unique<NetworkPredictor>(cfg, false, seed);
    case PredictorKind::Avg: cfg.validate(); return std::make_unique<AveragePredictor>(cfg);
  }
  throw std::invalid_argument("make_predictor: unknown kind");
}

TrainingReport train_epoch_end(Predictor& pred, const ReplayBuffer& replay, Rng& rng) {
  TrainingReport report;
  if (!pred.trainable() || replay.empty()) return report;
  const PredictorConfig& cfg = pred.config();
  const std::size_t passes = std::min(cfg.replay_depth + 1, replay.size());

  double lr = cfg.learning_rate;
  for (std::size_t i = 0; i < passes; ++i, lr *= cfg.discount) {
    const EpochDataset& data = replay.at(i);
    std::vector<std::size_t> order = data.train_indices();
    if (order.empty() || lr == 0.0) {
      report.dataset_loss.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    rng.shuffle(std::span<std::size_t>(order));
    pred.snapshot();
    double total = 0.0;
    std::size_t batches = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size() && !diverged; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const double loss = pred.train_batch(data, std::span<const std::size_t>(order).subspan(start, len), lr);
      diverged = !std::isfinite(loss);
      report.batch_losses.push_back(loss);
      total += loss;
      ++batches;
    }
    if (diverged || !pred.parameters_finite()) {
      pred.rollback();
      ++report.diverged_passes;
      report.dataset_loss.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    report.dataset_loss.push_back(total / static_cast<double>(batches));
  }

  const EpochDataset& newest = replay.at(0);
  if (!newest.holdout_indices().empty()) {
    report.validation_loss = eval_mse(pred, newest, newest.holdout_indices());
    report.has_validation = true;
  }
  return report;
}

double eval_mse(const Predictor& pred, const EpochDataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw UndefinedResultError("eval_mse: no samples");
  double sum = 0.0;
  for (const std::size_t r : rows) {
    const double d = pred.transformed_output(data.input(r)) - data.target(r);
    sum += d * d;
  }
  return sum / static_cast<double>(rows.size());
}

double eval_mse(const Predictor& pred, const EpochDataset& data) {
  if (data.empty()) throw UndefinedResultError("eval_mse: empty dataset");
  double sum = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double d = pred.transformed_output(data.input(r)) - data.target(r);
    sum += d * d;
  }
  return sum / static_cast<double>(data.size());
}

nlohmann::json checkpoint(const NetworkPredictor& pred) {
  return {{"config", to_json(pred.config())}, {"network", to_json(pred.network())}};
}

NetworkPredictor restore_checkpoint(const nlohmann::json& j) {
  return NetworkPredictor(predictor_config_from_json(j.at("config")), mlp_from_json(j.at("network")));
}

}  // namespace popcache
