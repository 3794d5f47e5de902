#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emasched/rng.hpp"

namespace emasched {

enum class Activation { Identity, Relu, LeakyRelu, Sigmoid };
std::string to_string(Activation a);
Activation parse_activation(std::string_view s);

enum class LossKind { BinaryCrossEntropy, MeanSquaredError };
std::string to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);

struct MlpSpec {
  std::vector<int> hidden;              // output size of each hidden layer
  std::vector<Activation> activations;  // one per hidden layer
  Activation output_activation = Activation::Identity;
  double dropout_rate = 0.0;
  std::vector<int> dropout_after;  // hidden-layer indices followed by dropout
  LossKind loss = LossKind::MeanSquaredError;
  double learning_rate = 0.01;
  int epochs = 100;
  int batch_size = 32;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Inverted-dropout masks (entries 0 or 1/(1-p)), one N x width matrix per
/// hidden layer; layers without dropout hold an empty matrix.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

class Mlp {
 public:
  Mlp() = default;
  /// He-uniform weights drawn from `spec.seed`, zero biases.
  Mlp(int inputs, const MlpSpec& spec);

  int inputs() const { return inputs_; }
  const MlpSpec& spec() const { return spec_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Rows of `x` are samples; returns the post-activation output column.
  Eigen::VectorXd forward(const Eigen::MatrixXd& x, const DropoutMasks* masks = nullptr) const;
  /// Activation of layer l for inputs `a`, before any dropout mask.
  Eigen::MatrixXd layer_output(std::size_t l, const Eigen::MatrixXd& a) const;
  /// Continues a forward pass from the unmasked output of layer `l`.
  Eigen::VectorXd forward_from(std::size_t l, Eigen::MatrixXd a, const DropoutMasks* masks = nullptr) const;

  /// Masks for `rows` samples from a training RNG.
  DropoutMasks sample_masks(Eigen::Index rows, Rng& rng) const;
  /// Masks where row i is drawn from the counter-based stream `streams[i]`.
  DropoutMasks pass_masks(const std::vector<std::uint64_t>& streams) const;

  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const DropoutMasks* masks = nullptr) const;

  struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as parameters()
  };
  LossGradient loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const DropoutMasks* masks = nullptr) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& params);
  Eigen::Index parameter_count() const;

  /// Mini-batch gradient descent. Returns the full-data loss (dropout off)
  /// before training followed by one entry per epoch.
  std::vector<double> train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

  bool operator==(const Mlp& other) const;

 private:
  Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) const;
  Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& z, Activation a) const;

  int inputs_ = 0;
  MlpSpec spec_;
  std::vector<DenseLayer> layers_;
};

}  // namespace emasched
