#include "emasched/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace emasched {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "leaky_relu") return Activation::LeakyRelu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

std::string to_string(LossKind k) { return k == LossKind::BinaryCrossEntropy ? "bce" : "mse"; }

LossKind parse_loss_kind(std::string_view s) {
  if (s == "bce") return LossKind::BinaryCrossEntropy;
  if (s == "mse") return LossKind::MeanSquaredError;
  throw std::invalid_argument("unknown loss '" + std::string(s) + "'");
}

void MlpSpec::validate() const {
  if (activations.size() != hidden.size())
    throw std::invalid_argument("one activation per hidden layer is required");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("layer sizes must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  for (int d : dropout_after)
    if (d < 0 || d >= static_cast<int>(hidden.size()))
      throw std::invalid_argument("dropout placement refers to a missing hidden layer");
  if (loss == LossKind::BinaryCrossEntropy && output_activation != Activation::Sigmoid)
    throw std::invalid_argument("binary cross-entropy requires a sigmoid output");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
}

Mlp::Mlp(int inputs, const MlpSpec& spec) : inputs_(inputs), spec_(spec) {
  spec_.validate();
  if (inputs <= 0) throw std::invalid_argument("network needs at least one input");
  Rng rng = make_rng(spec_.seed, {0x1a11});
  int fan_in = inputs;
  std::vector<int> sizes = spec_.hidden;
  sizes.push_back(1);
  for (int out : sizes) {
    DenseLayer layer;
    layer.weights.resize(out, fan_in);
    const double limit = std::sqrt(6.0 / fan_in);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        layer.weights(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    layer.bias = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
    fan_in = out;
  }
}

Eigen::MatrixXd Mlp::activate(const Eigen::MatrixXd& z, Activation a) const {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::LeakyRelu: {
      const double s = spec_.leaky_slope;
      return z.unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
    }
    case Activation::Sigmoid: return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return z;
}

Eigen::MatrixXd Mlp::activation_derivative(const Eigen::MatrixXd& z, Activation a) const {
  switch (a) {
    case Activation::Identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::Relu: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::LeakyRelu: {
      const double s = spec_.leaky_slope;
      return z.unaryExpr([s](double v) { return v > 0.0 ? 1.0 : s; });
    }
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) {
        const double p = 1.0 / (1.0 + std::exp(-v));
        return p * (1.0 - p);
      });
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

namespace {

bool has_dropout(const MlpSpec& spec, std::size_t layer) {
  return spec.dropout_rate > 0.0 &&
         std::find(spec.dropout_after.begin(), spec.dropout_after.end(), static_cast<int>(layer)) !=
             spec.dropout_after.end();
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

Eigen::MatrixXd Mlp::layer_output(std::size_t l, const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd z = a * layers_[l].weights.transpose();
  z.rowwise() += layers_[l].bias.transpose();
  return activate(z, l + 1 == layers_.size() ? spec_.output_activation : spec_.activations[l]);
}

Eigen::VectorXd Mlp::forward_from(std::size_t l, Eigen::MatrixXd a, const DropoutMasks* masks) const {
  for (;; ++l) {
    if (l + 1 == layers_.size()) return a.col(0);
    if (masks && (*masks)[l].size() > 0) a.array() *= (*masks)[l].array();
    a = layer_output(l + 1, a);
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& x, const DropoutMasks* masks) const {
  if (x.cols() != inputs_) throw std::invalid_argument("feature count does not match the network");
  return forward_from(0, layer_output(0, x), masks);
}

DropoutMasks Mlp::sample_masks(Eigen::Index rows, Rng& rng) const {
  DropoutMasks masks(spec_.hidden.size());
  const double keep = 1.0 - spec_.dropout_rate;
  for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
    if (!has_dropout(spec_, l)) continue;
    masks[l].resize(rows, spec_.hidden[l]);
    for (Eigen::Index c = 0; c < masks[l].cols(); ++c)
      for (Eigen::Index r = 0; r < rows; ++r) masks[l](r, c) = uniform01(rng) < keep ? 1.0 / keep : 0.0;
  }
  return masks;
}

DropoutMasks Mlp::pass_masks(const std::vector<std::uint64_t>& streams) const {
  DropoutMasks masks(spec_.hidden.size());
  const double keep = 1.0 - spec_.dropout_rate;
  const auto rows = static_cast<Eigen::Index>(streams.size());
  const auto& base = streams;
  for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
    if (!has_dropout(spec_, l)) continue;
    masks[l].resize(rows, spec_.hidden[l]);
    for (Eigen::Index c = 0; c < masks[l].cols(); ++c) {
      const std::uint64_t unit = splitmix64((static_cast<std::uint64_t>(l) << 32) | static_cast<std::uint64_t>(c));
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double u = static_cast<double>(splitmix64(base[static_cast<std::size_t>(r)] ^ unit) >> 11) *
                         0x1.0p-53;
        masks[l](r, c) = u < keep ? 1.0 / keep : 0.0;
      }
    }
  }
  return masks;
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const DropoutMasks* masks) const {
  if (x.rows() != y.size() || x.rows() == 0) throw std::invalid_argument("inputs and targets must align");
  if (spec_.loss == LossKind::MeanSquaredError) return (forward(x, masks) - y).squaredNorm() / static_cast<double>(x.rows());
  // BCE from the pre-sigmoid output
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Eigen::MatrixXd z = a * layers_[l].weights.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    a = activate(z, spec_.activations[l]);
    if (masks && (*masks)[l].size() > 0) a.array() *= (*masks)[l].array();
  }
  Eigen::VectorXd z = a * layers_.back().weights.transpose();
  z.array() += layers_.back().bias(0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
  return total / static_cast<double>(x.rows());
}

Mlp::LossGradient Mlp::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const DropoutMasks* masks) const {
  if (x.cols() != inputs_) throw std::invalid_argument("feature count does not match the network");
  if (x.rows() != y.size() || x.rows() == 0) throw std::invalid_argument("inputs and targets must align");
  const std::size_t L = layers_.size();
  const double n = static_cast<double>(x.rows());
  std::vector<Eigen::MatrixXd> acts(L + 1), pre(L);
  acts[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = acts[l] * layers_[l].weights.transpose();
    pre[l].rowwise() += layers_[l].bias.transpose();
    const bool last = l + 1 == L;
    acts[l + 1] = activate(pre[l], last ? spec_.output_activation : spec_.activations[l]);
    if (!last && masks && (*masks)[l].size() > 0) acts[l + 1].array() *= (*masks)[l].array();
  }

  LossGradient out;
  Eigen::MatrixXd delta(x.rows(), 1);
  const Eigen::VectorXd z = pre[L - 1].col(0);
  if (spec_.loss == LossKind::BinaryCrossEntropy) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      total += softplus(z(i)) - y(i) * z(i);
      delta(i, 0) = (1.0 / (1.0 + std::exp(-z(i))) - y(i)) / n;
    }
    out.loss = total / n;
  } else {
    const Eigen::VectorXd err = acts[L].col(0) - y;
    out.loss = err.squaredNorm() / n;
    delta.col(0) = (2.0 / n) * err.array() * activation_derivative(pre[L - 1], spec_.output_activation).col(0).array();
  }

  std::vector<Eigen::MatrixXd> gw(L);
  std::vector<Eigen::VectorXd> gb(L);
  for (std::size_t l = L; l-- > 0;) {
    gw[l] = delta.transpose() * acts[l];
    gb[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * layers_[l].weights;
    if (masks && (*masks)[l - 1].size() > 0) back.array() *= (*masks)[l - 1].array();
    delta = back.array() * activation_derivative(pre[l - 1], spec_.activations[l - 1]).array();
  }

  out.gradient.resize(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < L; ++l) {
    out.gradient.segment(k, gw[l].size()) = Eigen::Map<const Eigen::VectorXd>(gw[l].data(), gw[l].size());
    k += gw[l].size();
    out.gradient.segment(k, gb[l].size()) = gb[l];
    k += gb[l].size();
  }
  return out;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    p.segment(k, l.weights.size()) = Eigen::Map<const Eigen::VectorXd>(l.weights.data(), l.weights.size());
    k += l.weights.size();
    p.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return p;
}

void Mlp::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != parameter_count()) throw std::invalid_argument("parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weights.data(), l.weights.size()) = params.segment(k, l.weights.size());
    k += l.weights.size();
    l.bias = params.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

std::vector<double> Mlp::train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw std::invalid_argument("empty training set");
  std::vector<double> log;
  log.push_back(loss(x, y));
  Rng rng = make_rng(spec_.seed, {0x7a1b});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<Eigen::Index>(spec_.batch_size);
  Eigen::VectorXd params = parameters();
  for (int epoch = 0; epoch < spec_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < x.rows(); start += batch) {
      const Eigen::Index m = std::min(batch, x.rows() - start);
      Eigen::MatrixXd xb(m, x.cols());
      Eigen::VectorXd yb(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
        yb(i) = y(order[static_cast<std::size_t>(start + i)]);
      }
      const DropoutMasks masks = sample_masks(m, rng);
      const LossGradient lg = loss_and_gradient(xb, yb, &masks);
      params -= spec_.learning_rate * lg.gradient;
      set_parameters(params);
    }
    log.push_back(loss(x, y));
  }
  return log;
}

bool Mlp::operator==(const Mlp& other) const {
  if (inputs_ != other.inputs_ || !(spec_ == other.spec_) || layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weights.rows() != other.layers_[l].weights.rows() ||
        layers_[l].weights.cols() != other.layers_[l].weights.cols())
      return false;
    if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

}  // namespace emasched
