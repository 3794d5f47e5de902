#include "emasched/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "emasched/io.hpp"

namespace emasched {

MlpSpec receptivity_spec(std::uint64_t seed) {
  MlpSpec s;
  s.hidden = {16, 8};
  s.activations = {Activation::Relu, Activation::Relu};
  s.output_activation = Activation::Sigmoid;
  s.loss = LossKind::BinaryCrossEntropy;
  s.seed = seed;
  return s;
}

MlpSpec emotion_spec(std::uint64_t seed) {
  MlpSpec s;
  s.hidden = {64, 32, 16};
  s.activations = {Activation::LeakyRelu, Activation::LeakyRelu, Activation::LeakyRelu};
  s.output_activation = Activation::Identity;
  s.dropout_rate = 0.3;
  s.dropout_after = {0, 1};
  s.loss = LossKind::MeanSquaredError;
  s.seed = seed;
  return s;
}

Json spec_to_json(const MlpSpec& spec) {
  Json acts = Json::array();
  for (auto a : spec.activations) acts.push_back(to_string(a));
  return Json{{"hidden", spec.hidden},
              {"activations", acts},
              {"output_activation", to_string(spec.output_activation)},
              {"dropout_rate", spec.dropout_rate},
              {"dropout_after", spec.dropout_after},
              {"loss", to_string(spec.loss)},
              {"learning_rate", spec.learning_rate},
              {"epochs", spec.epochs},
              {"batch_size", spec.batch_size},
              {"leaky_slope", spec.leaky_slope},
              {"seed", spec.seed}};
}

MlpSpec spec_from_json(const Json& j, std::string_view path) {
  MlpSpec s;
  read_field(j, "hidden", s.hidden, path);
  std::vector<std::string> acts;
  read_field(j, "activations", acts, path);
  s.activations.clear();
  try {
    for (const auto& a : acts) s.activations.push_back(parse_activation(a));
    std::string out = to_string(s.output_activation), loss = to_string(s.loss);
    read_field(j, "output_activation", out, path);
    read_field(j, "loss", loss, path);
    s.output_activation = parse_activation(out);
    s.loss = parse_loss_kind(loss);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(path), e.what());
  }
  read_field(j, "dropout_rate", s.dropout_rate, path);
  read_field(j, "dropout_after", s.dropout_after, path);
  read_field(j, "learning_rate", s.learning_rate, path);
  read_field(j, "epochs", s.epochs, path);
  read_field(j, "batch_size", s.batch_size, path);
  read_field(j, "leaky_slope", s.leaky_slope, path);
  read_field(j, "seed", s.seed, path);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(path), e.what());
  }
  return s;
}

namespace {

void require_finite(const Eigen::MatrixXd& x) {
  if (!x.allFinite()) throw std::invalid_argument("feature matrix contains masked or non-finite values");
}

void check_hash(const TrainedModel& model, std::string_view registry_hash, Eigen::Index cols) {
  if (model.registry_hash != registry_hash)
    throw std::invalid_argument("feature registry hash mismatch: model " + model.registry_hash + ", data " +
                                std::string(registry_hash));
  if (cols != model.net.inputs())
    throw std::invalid_argument("feature count mismatch: model expects " + std::to_string(model.net.inputs()) +
                                ", got " + std::to_string(cols));
}

}  // namespace

TrainedModel train_receptivity(const Eigen::MatrixXd& x, std::span<const int> labels, const MlpSpec& spec,
                               std::string registry_hash) {
  if (x.rows() == 0 || labels.empty()) throw std::invalid_argument("empty training set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("features and labels differ in length");
  require_finite(x);
  Eigen::VectorXd y(x.rows());
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("receptivity labels must be 0 or 1");
    seen[labels[i]] = true;
    y(static_cast<Eigen::Index>(i)) = labels[i];
  }
  if (!seen[0] || !seen[1]) throw std::invalid_argument("degenerate labels");
  TrainedModel m;
  m.kind = ModelKind::Receptivity;
  m.net = Mlp(static_cast<int>(x.cols()), spec);
  m.registry_hash = std::move(registry_hash);
  m.training_log = m.net.train(x, y);
  return m;
}

double predict_receptivity(const TrainedModel& model, const Eigen::RowVectorXd& row, std::string_view registry_hash) {
  return predict_receptivity(model, Eigen::MatrixXd(row), registry_hash)(0);
}

Eigen::VectorXd predict_receptivity(const TrainedModel& model, const Eigen::MatrixXd& rows,
                                    std::string_view registry_hash) {
  check_hash(model, registry_hash, rows.cols());
  return model.net.forward(rows);
}

TrainedModel train_emotion(const Eigen::MatrixXd& x, const Eigen::VectorXd& pa, const MlpSpec& spec,
                           std::string registry_hash) {
  if (x.rows() == 0 || pa.size() == 0) throw std::invalid_argument("empty training set");
  if (x.rows() != pa.size()) throw std::invalid_argument("features and labels differ in length");
  require_finite(x);
  const std::set<double> distinct(pa.data(), pa.data() + pa.size());
  if (distinct.size() < 2) throw std::invalid_argument("zero-variance target");
  TrainedModel m;
  m.kind = ModelKind::Emotion;
  m.target_mean = pa.mean();
  m.target_sd = std::sqrt((pa.array() - m.target_mean).square().mean());
  m.net = Mlp(static_cast<int>(x.cols()), spec);
  m.registry_hash = std::move(registry_hash);
  const Eigen::VectorXd z = (pa.array() - m.target_mean) / m.target_sd;
  m.training_log = m.net.train(x, z);
  return m;
}

Eigen::VectorXd predict_emotion(const TrainedModel& model, const Eigen::MatrixXd& rows) {
  return (model.net.forward(rows).array() * model.target_sd + model.target_mean).matrix();
}

McEstimate mc_dropout_predict(const TrainedModel& model, const Eigen::RowVectorXd& row, int passes,
                              std::uint64_t seed) {
  const std::uint64_t seeds[1] = {seed};
  return mc_dropout_predict(model, Eigen::MatrixXd(row), passes, seeds)[0];
}

std::vector<McEstimate> mc_dropout_predict(const TrainedModel& model, const Eigen::MatrixXd& rows, int passes,
                                           std::span<const std::uint64_t> seeds) {
  if (passes < 1) throw std::invalid_argument("passes must be at least 1");
  if (static_cast<std::size_t>(rows.rows()) != seeds.size())
    throw std::invalid_argument("one seed per row is required");
  if (rows.cols() != model.net.inputs()) throw std::invalid_argument("feature count does not match the network");
  std::vector<McEstimate> out(seeds.size());
  const auto& spec = model.net.spec();
  if (spec.dropout_rate == 0.0 || spec.dropout_after.empty()) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      out[static_cast<std::size_t>(i)] = {model.net.forward(rows.row(i))(0) * model.target_sd + model.target_mean, 0.0};
    return out;
  }
  const auto P = static_cast<Eigen::Index>(passes);
  // one input row per product keeps every row's arithmetic independent of the batch
  for (Eigen::Index start = 0; start < rows.rows(); ++start) {
    const Eigen::Index m = 1;
    // the first layer precedes every dropout mask, so it is shared by all passes
    const Eigen::MatrixXd first = model.net.layer_output(0, rows.middleRows(start, m));
    Eigen::MatrixXd stacked(m * P, first.cols());
    std::vector<std::uint64_t> streams(static_cast<std::size_t>(m * P));
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < P; ++k) {
        stacked.row(i * P + k) = first.row(i);
        streams[static_cast<std::size_t>(i * P + k)] =
            derive_seed(seeds[static_cast<std::size_t>(start + i)], {static_cast<std::uint64_t>(k)});
      }
    }
    const DropoutMasks masks = model.net.pass_masks(streams);
    const Eigen::VectorXd y = model.net.forward_from(0, std::move(stacked), &masks);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::VectorXd v = y.segment(i * P, P).array() * model.target_sd + model.target_mean;
      const double mean = v.mean();
      const double var = passes == 1 ? 0.0 : (v.array() - mean).square().mean();
      out[static_cast<std::size_t>(start + i)] = {mean, var};
    }
  }
  return out;
}

Json model_to_json(const TrainedModel& model) {
  Json layers = Json::array();
  for (const auto& l : model.net.layers()) {
    layers.push_back(Json{{"rows", l.weights.rows()},
                          {"cols", l.weights.cols()},
                          {"weights", std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size())},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return Json{{"schema_version", 1},
              {"kind", model.kind == ModelKind::Receptivity ? "receptivity" : "emotion"},
              {"inputs", model.net.inputs()},
              {"spec", spec_to_json(model.net.spec())},
              {"registry_hash", model.registry_hash},
              {"target_mean", model.target_mean},
              {"target_sd", model.target_sd},
              {"training_log", model.training_log},
              {"layers", layers}};
}

TrainedModel model_from_json(const Json& j) {
  TrainedModel m;
  const auto kind = require_field<std::string>(j, "kind", "");
  if (kind != "receptivity" && kind != "emotion") throw ConfigError("kind", "unknown model kind '" + kind + "'");
  m.kind = kind == "receptivity" ? ModelKind::Receptivity : ModelKind::Emotion;
  const int inputs = require_field<int>(j, "inputs", "");
  if (!j.contains("spec")) throw ConfigError("spec", "required field missing");
  const MlpSpec spec = spec_from_json(j.at("spec"));
  m.net = Mlp(inputs, spec);
  m.registry_hash = require_field<std::string>(j, "registry_hash", "");
  m.target_mean = require_field<double>(j, "target_mean", "");
  m.target_sd = require_field<double>(j, "target_sd", "");
  read_field(j, "training_log", m.training_log, "");
  if (!j.contains("layers") || !j.at("layers").is_array() || j.at("layers").size() != m.net.layers().size())
    throw ConfigError("layers", "layer count does not match the spec");
  for (std::size_t l = 0; l < m.net.layers().size(); ++l) {
    const Json& jl = j.at("layers")[l];
    auto& layer = m.net.layers()[l];
    const std::string p = "layers[" + std::to_string(l) + "]";
    const auto w = require_field<std::vector<double>>(jl, "weights", p);
    const auto b = require_field<std::vector<double>>(jl, "bias", p);
    if (static_cast<Eigen::Index>(w.size()) != layer.weights.size() ||
        static_cast<Eigen::Index>(b.size()) != layer.bias.size())
      throw ConfigError(p, "weight shape does not match the spec");
    for (double v : w)
      if (!std::isfinite(v)) throw ConfigError(p, "non-finite weight");
    layer.weights = Eigen::Map<const Eigen::MatrixXd>(w.data(), layer.weights.rows(), layer.weights.cols());
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), layer.bias.size());
  }
  return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model).dump(1) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(Json::parse(read_text_file(path)));
  } catch (const Json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

double OlsModel::predict(const Eigen::RowVectorXd& row) const {
  return coef(0) + row.dot(coef.tail(coef.size() - 1));
}

Eigen::VectorXd OlsModel::predict(const Eigen::MatrixXd& rows) const {
  return (rows * coef.tail(coef.size() - 1)).array() + coef(0);
}

double GaussianNaiveBayes::predict_proba(const Eigen::RowVectorXd& row) const {
  double ll[2];
  for (int c = 0; c < 2; ++c) {
    double s = log_prior(c);
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      const double v = vars(c, k);
      const double d = row(k) - means(c, k);
      s += -0.5 * std::log(2.0 * 3.14159265358979323846 * v) - d * d / (2.0 * v);
    }
    ll[c] = s;
  }
  const double mx = std::max(ll[0], ll[1]);
  const double e0 = std::exp(ll[0] - mx), e1 = std::exp(ll[1] - mx);
  return e1 / (e0 + e1);
}

BernoulliBaseline fit_bernoulli(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("empty training set");
  double s = 0.0;
  for (int l : labels) s += l;
  return {s / static_cast<double>(labels.size())};
}

GaussianBaseline fit_gaussian(std::span<const double> pa) {
  if (pa.empty()) throw std::invalid_argument("empty training set");
  double mean = 0.0;
  for (double v : pa) mean += v;
  mean /= static_cast<double>(pa.size());
  double ss = 0.0;
  for (double v : pa) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(pa.size()))};
}

OlsModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge_scale) {
  if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("OLS needs aligned, nonempty data");
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  OlsModel m;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() == design.cols()) {
    m.coef = qr.solve(y);
    return m;
  }
  // rank-deficient design: ridge on the slopes, intercept unpenalised
  m.ridge = true;
  Eigen::MatrixXd gram = design.transpose() * design;
  const double scale = gram.diagonal().tail(x.cols()).mean();
  const double lambda = ridge_scale * (scale > 0.0 ? scale : 1.0);
  for (Eigen::Index k = 1; k < gram.rows(); ++k) gram(k, k) += lambda;
  m.coef = gram.ldlt().solve(design.transpose() * y);
  return m;
}

GaussianNaiveBayes fit_naive_bayes(const Eigen::MatrixXd& x, std::span<const int> labels) {
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("naive Bayes needs aligned, nonempty data");
  GaussianNaiveBayes nb;
  const Eigen::Index d = x.cols();
  nb.means = Eigen::MatrixXd::Zero(2, d);
  nb.vars = Eigen::MatrixXd::Zero(2, d);
  double count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c != 0 && c != 1) throw std::invalid_argument("labels must be 0 or 1");
    count[c] += 1.0;
    nb.means.row(c) += x.row(i);
  }
  if (count[0] == 0.0 || count[1] == 0.0) throw std::invalid_argument("degenerate labels");
  for (int c = 0; c < 2; ++c) nb.means.row(c) /= count[c];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    nb.vars.row(c).array() += (x.row(i) - nb.means.row(c)).array().square();
  }
  for (int c = 0; c < 2; ++c) nb.vars.row(c) /= count[c];
  // variance smoothing relative to the largest feature variance
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double max_var = ((x.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(x.rows())).maxCoeff();
  nb.vars.array() += 1e-9 * std::max(max_var, std::numeric_limits<double>::min()) + 1e-12;
  const double n = count[0] + count[1];
  nb.log_prior << std::log(count[0] / n), std::log(count[1] / n);
  return nb;
}

Baselines fit_baselines(const Eigen::MatrixXd& x_receptivity, std::span<const int> labels,
                        const Eigen::MatrixXd& x_emotion, const Eigen::VectorXd& pa) {
  Baselines b;
  b.receptivity = fit_bernoulli(labels);
  b.emotion = fit_gaussian(std::span<const double>(pa.data(), static_cast<std::size_t>(pa.size())));
  b.linear = fit_ols(x_emotion, pa);
  b.naive_bayes = fit_naive_bayes(x_receptivity, labels);
  return b;
}

}  // namespace emasched
