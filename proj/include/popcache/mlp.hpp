#ifndef POPCACHE_MLP_HPP
#define POPCACHE_MLP_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace popcache {

/// Leaky ReLU: x for x >= 0, slope * x otherwise.
inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

/// One fully connected layer; `activated` applies leaky ReLU to its output.
struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  bool activated = false;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

struct GradientSet;

/// Dense feedforward network. Hidden layers may use leaky ReLU; the output
/// layer is always affine.
class Mlp {
 public:
  Mlp(std::vector<DenseLayer> layers, double activation_slope);

  /// Glorot-uniform weights, zero biases. `dims` lists layer widths from the
  /// input to the output, so it needs at least two entries.
  static Mlp glorot(std::span<const std::size_t> dims, std::uint64_t seed, double activation_slope,
                    bool hidden_activation = true);

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  std::size_t parameter_count() const;
  double activation_slope() const { return slope_; }

  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Bumped by every parameter update; forward caches remember it.
  std::uint64_t version() const { return version_; }

 private:
  friend void sgd_step(Mlp&, const GradientSet&, double);

  std::vector<DenseLayer> layers_;
  double slope_;
  std::uint64_t version_ = 0;
};

/// Per-layer activations of a batch forward pass (samples are columns).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;           // input fed to layer l
  std::vector<Eigen::MatrixXd> pre_activations;  // affine output of layer l
  Eigen::MatrixXd output;
  std::uint64_t net_version = 0;
};

struct GradientSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  static GradientSet zeros_like(const Mlp& net);
};

/// Batch forward pass; `batch` is in_dim x B. Throws ShapeError on mismatch.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& batch, ForwardCache* cache = nullptr);
std::vector<double> forward(const Mlp& net, std::span<const double> input);
/// Single-output shortcut used on the prediction hot path.
double forward_scalar(const Mlp& net, std::span<const double> input);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Exact gradients of the batch MSE (mean over samples and outputs) with
/// respect to every weight and bias. The derivative at the kink is the slope.
/// Throws std::logic_error if `cache` is stale or was built for another shape.
GradientSet backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& targets);

/// theta <- theta - lr * grad.
void sgd_step(Mlp& net, const GradientSet& grads, double lr);

/// Layer-ordered flat parameters: each layer's weights row-major, then its biases.
std::vector<double> flatten_parameters(const Mlp& net);

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace popcache

#endif  // POPCACHE_MLP_HPP
