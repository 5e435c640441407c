#include "popcache/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "popcache/errors.hpp"
#include "popcache/rng.hpp"

namespace popcache {

namespace {

void apply_leaky_relu(Eigen::MatrixXd& m, double slope) {
  m = m.unaryExpr([slope](double x) { return leaky_relu(x, slope); });
}

void check_finite(const DenseLayer& layer) {
  if (!layer.weights.allFinite() || !layer.bias.allFinite())
    throw std::invalid_argument("Mlp: non-finite parameter");
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers, double activation_slope)
    : layers_(std::move(layers)), slope_(activation_slope) {
  if (layers_.empty()) throw std::invalid_argument("Mlp: at least one layer required");
  if (!(slope_ >= 0.0) || !std::isfinite(slope_)) throw std::invalid_argument("Mlp: slope must be >= 0");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0)
      throw ShapeError("Mlp: empty layer " + std::to_string(l));
    if (layer.bias.size() != layer.weights.rows())
      throw ShapeError("Mlp: bias size mismatch in layer " + std::to_string(l));
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim())
      throw ShapeError("Mlp: layer " + std::to_string(l) + " does not chain with its predecessor");
    check_finite(layer);
  }
  layers_.back().activated = false;
}

Mlp Mlp::glorot(std::span<const std::size_t> dims, std::uint64_t seed, double activation_slope,
                bool hidden_activation) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp::glorot: need input and output widths");
  Rng rng(derive_seed(seed, "mlp/init"));
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    if (in == 0 || out == 0) throw std::invalid_argument("Mlp::glorot: zero-width layer");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = (2.0 * rng.uniform01() - 1.0) * limit;
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    layer.activated = hidden_activation && (l + 2 < dims.size());
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers), activation_slope);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  return n;
}

GradientSet GradientSet::zeros_like(const Mlp& net) {
  GradientSet g;
  for (const auto& layer : net.layers()) {
    g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& batch, ForwardCache* cache) {
  if (static_cast<std::size_t>(batch.rows()) != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(batch.rows()) + " rows, network expects " +
                     std::to_string(net.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
    cache->net_version = net.version();
  }
  Eigen::MatrixXd a = batch;
  for (const auto& layer : net.layers()) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre_activations.push_back(z);
    }
    if (layer.activated) apply_leaky_relu(z, net.activation_slope());
    a = std::move(z);
  }
  if (cache) cache->output = a;
  return a;
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  const Eigen::MatrixXd y = forward(net, Eigen::MatrixXd(x));
  return {y.data(), y.data() + y.size()};
}

double forward_scalar(const Mlp& net, std::span<const double> input) {
  if (input.size() != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(input.size()) + " entries, network expects " +
                     std::to_string(net.input_dim()));
  if (net.output_dim() != 1) throw ShapeError("forward_scalar: network has more than one output");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (const auto& layer : net.layers()) {
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    if (layer.activated) {
      const double slope = net.activation_slope();
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = leaky_relu(z[i], slope);
    }
    a = std::move(z);
  }
  return a[0];
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss: length mismatch");
  if (pred.empty()) throw ShapeError("mse_loss: empty vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

GradientSet backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& targets) {
  const auto& layers = net.layers();
  if (cache.net_version != net.version() || cache.inputs.size() != layers.size() ||
      cache.pre_activations.size() != layers.size())
    throw std::logic_error("backward: forward cache does not belong to this network state");
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (static_cast<std::size_t>(cache.inputs[l].rows()) != layers[l].in_dim() ||
        static_cast<std::size_t>(cache.pre_activations[l].rows()) != layers[l].out_dim())
      throw std::logic_error("backward: forward cache shape does not match the network");
  if (targets.rows() != cache.output.rows() || targets.cols() != cache.output.cols())
    throw ShapeError("backward: target shape does not match the output");

  const double scale = 2.0 / static_cast<double>(targets.size());
  GradientSet g;
  g.weights.resize(layers.size());
  g.bias.resize(layers.size());

  // delta = dLoss / d(pre-activation) of the current layer.
  Eigen::MatrixXd delta = scale * (cache.output - targets);
  const double slope = net.activation_slope();
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (layers[l].activated) {
      const Eigen::MatrixXd& z = cache.pre_activations[l];
      delta = delta.cwiseProduct(z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    }
    g.weights[l].noalias() = delta * cache.inputs[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l > 0) delta = layers[l].weights.transpose() * delta;
  }
  return g;
}

void sgd_step(Mlp& net, const GradientSet& grads, double lr) {
  if (grads.weights.size() != net.layers_.size() || grads.bias.size() != net.layers_.size())
    throw ShapeError("sgd_step: gradient set has a different layer count");
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    DenseLayer& layer = net.layers_[l];
    if (grads.weights[l].rows() != layer.weights.rows() || grads.weights[l].cols() != layer.weights.cols() ||
        grads.bias[l].size() != layer.bias.size())
      throw ShapeError("sgd_step: gradient shape mismatch in layer " + std::to_string(l));
  }
  if (lr == 0.0) return;
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    net.layers_[l].weights -= lr * grads.weights[l];
    net.layers_[l].bias -= lr * grads.bias[l];
  }
  ++net.version_;
}

std::vector<double> flatten_parameters(const Mlp& net) {
  std::vector<double> flat;
  flat.reserve(net.parameter_count());
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) flat.push_back(layer.weights(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat.push_back(layer.bias[r]);
  }
  return flat;
}

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json dims = nlohmann::json::array();
  nlohmann::json activated = nlohmann::json::array();
  dims.push_back(net.input_dim());
  for (const auto& layer : net.layers()) {
    dims.push_back(layer.out_dim());
    activated.push_back(layer.activated);
  }
  return {{"dims", dims},
          {"activated", activated},
          {"activation_slope", net.activation_slope()},
          {"parameters", flatten_parameters(net)}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  const auto activated = j.at("activated").get<std::vector<bool>>();
  const auto params = j.at("parameters").get<std::vector<double>>();
  const double slope = j.at("activation_slope").get<double>();
  if (dims.size() < 2 || activated.size() + 1 != dims.size())
    throw ShapeError("mlp_from_json: inconsistent dims/activated");

  std::vector<DenseLayer> layers;
  std::size_t pos = 0;
  auto take = [&]() {
    if (pos >= params.size()) throw ShapeError("mlp_from_json: parameter array too short");
    return params[pos++];
  };
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(dims[l + 1]), static_cast<Eigen::Index>(dims[l]));
    layer.bias.resize(static_cast<Eigen::Index>(dims[l + 1]));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = take();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = take();
    layer.activated = activated[l];
    layers.push_back(std::move(layer));
  }
  if (pos != params.size()) throw ShapeError("mlp_from_json: parameter array too long");
  return Mlp(std::move(layers), slope);
}

}  // namespace popcache
