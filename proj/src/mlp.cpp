#include "emsca/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "byte_io.hpp"
#include "emsca/error.hpp"
#include "emsca/parallel.hpp"
#include "emsca/rng.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;     // "init"
constexpr std::uint64_t kShuffleTag = 0x73687566;  // "shuf"
constexpr std::uint64_t kFoldTag = 0x666f6c64;     // "fold"

void activate(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::tanh) {
    z = z.array().tanh();
  } else {
    z = (1.0 + (-z.array()).exp()).inverse();
  }
}

// Derivative expressed through the activated value.
Eigen::ArrayXXd activation_slope(Activation a, const Eigen::MatrixXd& out) {
  if (a == Activation::tanh) return 1.0 - out.array().square();
  return out.array() * (1.0 - out.array());
}

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    auto col = z.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

// Forward pass over a column batch (one sample per column). acts[0] is the
// input, acts.back() the softmax output.
void forward(const MlpModel& m, const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& acts) {
  acts.resize(m.layers.size() + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    acts[l + 1].noalias() = layer.weights * acts[l];
    acts[l + 1].colwise() += layer.bias;
    if (l + 1 < m.layers.size()) activate(m.activation, acts[l + 1]);
  }
  softmax_columns(acts.back());
}

double cross_entropy(const Eigen::MatrixXd& probs, std::span<const std::uint32_t> labels) {
  double loss = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(j)], j), 1e-300));
  }
  return loss / static_cast<double>(probs.cols());
}

// Mean cross-entropy over the batch; fills grads (same shapes as layers).
double forward_backward(const MlpModel& m, const Eigen::MatrixXd& x,
                        std::span<const std::uint32_t> labels, std::vector<Eigen::MatrixXd>& acts,
                        std::vector<DenseLayer>& grads) {
  forward(m, x, acts);
  const double loss = cross_entropy(acts.back(), labels);
  const double inv_b = 1.0 / static_cast<double>(x.cols());

  Eigen::MatrixXd delta = acts.back();
  for (Eigen::Index j = 0; j < delta.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
  delta *= inv_b;

  grads.resize(m.layers.size());
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    grads[l].weights.noalias() = delta * acts[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = m.layers[l].weights.transpose() * delta;
      delta = (back.array() * activation_slope(m.activation, acts[l])).matrix();
    }
  }
  return loss;
}

void check_trainable(const Dataset& d) {
  d.validate();
  if (d.empty()) fail(Errc::invalid_dataset, "cannot train on an empty dataset");
  if (d.n_classes() < 2) {
    fail(Errc::invalid_dataset, "training needs at least 2 classes, dataset has " +
                                    std::to_string(d.n_classes()));
  }
  const auto counts = d.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) fail(Errc::invalid_dataset, "class " + d.class_table[c] + " has no rows");
  }
}

// Column-major copy of the dataset with the model's standardization applied.
Eigen::MatrixXd standardized_columns(const MlpModel& m, const Dataset& d) {
  const auto dim = static_cast<Eigen::Index>(d.feature_dim);
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(d.rows()));
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const auto r = d.row(i);
    auto col = x.col(static_cast<Eigen::Index>(i));
    for (Eigen::Index f = 0; f < dim; ++f) {
      const auto u = static_cast<std::size_t>(f);
      col(f) = m.feature_mean.empty() ? r[u] : (r[u] - m.feature_mean[u]) / m.feature_std[u];
    }
  }
  return x;
}

}  // namespace

void MlpConfig::validate() const {
  if (hidden_layers.empty()) fail(Errc::invalid_argument, "hidden_layers must not be empty");
  for (auto h : hidden_layers) {
    if (h == 0) fail(Errc::invalid_argument, "hidden layer sizes must be positive");
  }
  if (!(learning_rate > 0.0)) fail(Errc::invalid_argument, "learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(Errc::invalid_argument, "momentum must lie in [0, 1)");
  if (epochs == 0) fail(Errc::invalid_argument, "epochs must be >= 1");
  if (batch_size == 0) fail(Errc::invalid_argument, "batch_size must be >= 1");
}

std::size_t MlpModel::input_dim() const noexcept {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t MlpModel::output_dim() const noexcept {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows());
}

std::vector<std::size_t> MlpModel::topology() const {
  std::vector<std::size_t> t;
  if (layers.empty()) return t;
  t.push_back(input_dim());
  for (const auto& l : layers) t.push_back(static_cast<std::size_t>(l.weights.rows()));
  return t;
}

void MlpModel::validate() const {
  if (layers.empty()) fail(Errc::model_format, "model has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weights.rows()) {
      fail(Errc::model_format, "layer " + std::to_string(l) + " bias size mismatch");
    }
    if (l > 0 && layers[l].weights.cols() != layers[l - 1].weights.rows()) {
      fail(Errc::model_format, "layer " + std::to_string(l) + " does not chain to the previous layer");
    }
  }
  if (class_table.size() != output_dim()) {
    fail(Errc::model_format, "class table has " + std::to_string(class_table.size()) +
                                 " entries for " + std::to_string(output_dim()) + " outputs");
  }
  if (!feature_mean.empty()) {
    if (feature_mean.size() != input_dim() || feature_std.size() != input_dim()) {
      fail(Errc::model_format, "standardization statistics do not match the input dimension");
    }
    for (double s : feature_std) {
      if (!(s > 0.0)) fail(Errc::model_format, "standardization std must be positive");
    }
  }
}

MlpModel make_model(std::span<const std::size_t> topology, std::vector<std::string> class_table,
                    Activation activation) {
  if (topology.size() < 2) fail(Errc::invalid_argument, "topology needs input and output sizes");
  MlpModel m;
  m.activation = activation;
  for (std::size_t l = 0; l + 1 < topology.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(topology[l]);
    const auto out = static_cast<Eigen::Index>(topology[l + 1]);
    m.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  m.class_table = std::move(class_table);
  m.validate();
  return m;
}

MlpModel train(const Dataset& dataset, const MlpConfig& config, TrainLog* log) {
  config.validate();
  check_trainable(dataset);

  std::vector<std::size_t> topo{dataset.feature_dim};
  topo.insert(topo.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  topo.push_back(dataset.n_classes());
  MlpModel model = make_model(topo, dataset.class_table, config.activation);

  const std::size_t n = dataset.rows();
  const std::size_t dim = dataset.feature_dim;
  if (config.standardize) {
    model.feature_mean.assign(dim, 0.0);
    model.feature_std.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = dataset.row(i);
      for (std::size_t f = 0; f < dim; ++f) model.feature_mean[f] += r[f];
    }
    for (auto& v : model.feature_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = dataset.row(i);
      for (std::size_t f = 0; f < dim; ++f) {
        const double d = r[f] - model.feature_mean[f];
        model.feature_std[f] += d * d;
      }
    }
    for (auto& v : model.feature_std) {
      v = std::sqrt(v / static_cast<double>(n));
      if (!(v > 0.0)) v = 1.0;
    }
  }

  Rng init_rng(derive_seed(config.seed, kInitTag));
  for (auto& layer : model.layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.cols() + layer.weights.rows()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = init_rng.uniform(-limit, limit);
      }
    }
  }

  const Eigen::MatrixXd x = standardized_columns(model, dataset);
  std::vector<DenseLayer> velocity;
  for (const auto& layer : model.layers) {
    velocity.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }

  Rng shuffle_rng(derive_seed(config.seed, kShuffleTag));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::MatrixXd> acts;
  std::vector<DenseLayer> grads;
  Eigen::MatrixXd xb;
  std::vector<std::uint32_t> yb;
  std::vector<double> history;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      xb.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(b));
      yb.resize(b);
      for (std::size_t j = 0; j < b; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(order[start + j]));
        yb[j] = dataset.labels[order[start + j]];
      }
      const double loss = forward_backward(model, xb, yb, acts, grads);
      if (!std::isfinite(loss)) {
        fail(Errc::divergence, "training diverged at epoch " + std::to_string(epoch + 1) +
                                   " (learning rate " + text::format_double(config.learning_rate) + ")");
      }
      epoch_loss += loss * static_cast<double>(b);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        velocity[l].weights = config.momentum * velocity[l].weights - config.learning_rate * grads[l].weights;
        velocity[l].bias = config.momentum * velocity[l].bias - config.learning_rate * grads[l].bias;
        model.layers[l].weights += velocity[l].weights;
        model.layers[l].bias += velocity[l].bias;
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      fail(Errc::divergence, "training diverged at epoch " + std::to_string(epoch + 1) +
                                 " (learning rate " + text::format_double(config.learning_rate) + ")");
    }
    history.push_back(epoch_loss);
    const std::size_t p = config.early_stop_patience;
    if (p > 0 && history.size() > p &&
        std::abs(history.back() - history[history.size() - 1 - p]) < config.early_stop_tol) {
      if (log) log->early_stopped = true;
      break;
    }
  }
  if (log) log->epoch_loss = std::move(history);
  return model;
}

Prediction predict(const MlpModel& model, std::span<const double> features) {
  if (features.size() != model.input_dim()) {
    fail(Errc::shape, "expected " + std::to_string(model.input_dim()) + " features, got " +
                          std::to_string(features.size()));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), 1);
  for (std::size_t f = 0; f < features.size(); ++f) {
    x(static_cast<Eigen::Index>(f), 0) =
        model.feature_mean.empty() ? features[f]
                                   : (features[f] - model.feature_mean[f]) / model.feature_std[f];
  }
  std::vector<Eigen::MatrixXd> acts;
  forward(model, x, acts);
  Prediction p;
  const auto& probs = acts.back();
  p.scores.assign(probs.data(), probs.data() + probs.size());
  p.class_index = static_cast<std::size_t>(
      std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin());
  p.class_name = model.class_table[p.class_index];
  return p;
}

std::vector<std::size_t> predict_classes(const MlpModel& model, const Dataset& dataset) {
  if (dataset.feature_dim != model.input_dim()) {
    fail(Errc::shape, "expected " + std::to_string(model.input_dim()) + " features, dataset has " +
                          std::to_string(dataset.feature_dim));
  }
  const Eigen::MatrixXd x = standardized_columns(model, dataset);
  std::vector<std::size_t> out(dataset.rows());
  std::vector<Eigen::MatrixXd> acts;
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
    const Eigen::Index b = std::min(kChunk, x.cols() - start);
    forward(model, x.middleCols(start, b), acts);
    for (Eigen::Index j = 0; j < b; ++j) {
      Eigen::Index best = 0;
      acts.back().col(j).maxCoeff(&best);  // first maximum wins
      out[static_cast<std::size_t>(start + j)] = static_cast<std::size_t>(best);
    }
  }
  return out;
}

ClassificationReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                           std::vector<std::string> class_table) {
  ClassificationReport r;
  const std::size_t c = class_table.size();
  r.class_table = std::move(class_table);
  r.confusion = std::move(confusion);
  r.precision.assign(c, 0.0);
  r.recall.assign(c, 0.0);
  r.f1.assign(c, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += r.confusion[i][j];
      col += r.confusion[j][i];
      r.total += r.confusion[i][j];
    }
    const double tp = static_cast<double>(r.confusion[i][i]);
    correct += r.confusion[i][i];
    r.precision[i] = col ? tp / static_cast<double>(col) : 0.0;
    r.recall[i] = row ? tp / static_cast<double>(row) : 0.0;
    const double s = r.precision[i] + r.recall[i];
    r.f1[i] = s > 0.0 ? 2.0 * r.precision[i] * r.recall[i] / s : 0.0;
  }
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  r.macro_f1 = c ? std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / static_cast<double>(c) : 0.0;
  return r;
}

ClassificationReport evaluate(const MlpModel& model, const Dataset& dataset) {
  if (dataset.class_table != model.class_table) {
    fail(Errc::incompatible_dataset, "dataset class table does not match the model's");
  }
  dataset.validate();
  const auto predicted = predict_classes(model, dataset);
  const std::size_t c = model.class_table.size();
  std::vector<std::vector<std::size_t>> confusion(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < dataset.rows(); ++i) ++confusion[dataset.labels[i]][predicted[i]];
  return report_from_confusion(std::move(confusion), model.class_table);
}

std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& dataset, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) fail(Errc::invalid_argument, "k must be >= 2");
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (std::uint32_t c = 0; c < dataset.n_classes(); ++c) {
    auto idx = dataset.rows_of_class(c);
    Rng rng(derive_seed(seed, kFoldTag, c));
    rng.shuffle(std::span(idx));
    for (std::size_t j = 0; j < idx.size(); ++j) folds[(j + offset) % k].push_back(idx[j]);
    offset = (offset + idx.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

double ci95_halfwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

CrossValReport cross_validate(const Dataset& dataset, const MlpConfig& config, std::size_t k) {
  config.validate();
  check_trainable(dataset);
  const auto counts = dataset.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < k) {
      fail(Errc::insufficient_samples, "class " + dataset.class_table[c] + " has " +
                                           std::to_string(counts[c]) + " rows, " +
                                           std::to_string(k) + "-fold cross-validation needs " +
                                           std::to_string(k));
    }
  }
  const auto folds = stratified_folds(dataset, k, config.seed);
  std::vector<ClassificationReport> fold_reports(k);
  parallel_for(k, [&](std::size_t f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    MlpConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, kFoldTag, f);
    const MlpModel model = train(dataset.subset(train_idx), fold_config);
    fold_reports[f] = evaluate(model, dataset.subset(folds[f]));
  });

  CrossValReport r;
  r.k = k;
  const std::size_t c = dataset.n_classes();
  std::vector<std::vector<std::size_t>> pooled(c, std::vector<std::size_t>(c, 0));
  for (const auto& fr : fold_reports) {
    r.fold_accuracies.push_back(fr.accuracy);
    r.fold_macro_f1.push_back(fr.macro_f1);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) pooled[i][j] += fr.confusion[i][j];
    }
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.mean_accuracy = mean(r.fold_accuracies);
  r.ci95_halfwidth = ci95_halfwidth(r.fold_accuracies);
  r.mean_macro_f1 = mean(r.fold_macro_f1);
  r.f1_ci95_halfwidth = ci95_halfwidth(r.fold_macro_f1);
  r.pooled = report_from_confusion(std::move(pooled), dataset.class_table);
  return r;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  model.validate();
  detail::ByteWriter w;
  w.bytes(std::string_view(kMlpMagic, 8));
  w.u32(kMlpVersion);
  const auto topo = model.topology();
  w.u32(static_cast<std::uint32_t>(topo.size()));
  for (auto d : topo) w.u32(static_cast<std::uint32_t>(d));
  w.u8(static_cast<std::uint8_t>(model.activation));
  w.u32(static_cast<std::uint32_t>(model.class_table.size()));
  for (const auto& c : model.class_table) w.str(c);
  w.u8(model.feature_mean.empty() ? 0 : 1);
  if (!model.feature_mean.empty()) {
    w.f64s(model.feature_mean);
    w.f64s(model.feature_std);
  }
  for (const auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias(r));
  }
  text::write_file(path, w.view());
}

MlpModel load_model(const std::filesystem::path& path) {
  const std::string body = text::read_file(path);
  detail::ByteReader r(body, Errc::model_format, path.string());
  if (r.bytes(8) != std::string_view(kMlpMagic, 8)) {
    fail(Errc::model_format, path.string() + ": not an emsca MLP model");
  }
  const auto version = r.u32();
  if (version != kMlpVersion) {
    fail(Errc::model_format, path.string() + ": unsupported model version " + std::to_string(version));
  }
  const auto n_dims = r.u32();
  if (n_dims < 2 || n_dims > 64) fail(Errc::model_format, path.string() + ": bad layer count");
  std::vector<std::size_t> topo(n_dims);
  for (auto& d : topo) {
    d = r.u32();
    if (d == 0 || d > (1u << 24)) fail(Errc::model_format, path.string() + ": bad layer size");
  }
  const auto act = r.u8();
  if (act != static_cast<std::uint8_t>(Activation::tanh) &&
      act != static_cast<std::uint8_t>(Activation::logistic)) {
    fail(Errc::model_format, path.string() + ": unknown activation " + std::to_string(act));
  }
  const auto n_classes = r.u32();
  if (n_classes != topo.back()) fail(Errc::model_format, path.string() + ": class count mismatch");
  std::vector<std::string> classes(n_classes);
  for (auto& c : classes) c = r.str(4096);

  MlpModel m = make_model(topo, std::move(classes), static_cast<Activation>(act));
  const auto standardize = r.u8();
  if (standardize > 1) fail(Errc::model_format, path.string() + ": bad standardize flag");
  if (standardize) {
    m.feature_mean = r.f64s(topo.front());
    m.feature_std = r.f64s(topo.front());
  }
  for (auto& layer : m.layers) {
    for (Eigen::Index row = 0; row < layer.weights.rows(); ++row) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(row, c) = r.f64();
    }
    for (Eigen::Index row = 0; row < layer.bias.size(); ++row) layer.bias(row) = r.f64();
  }
  r.expect_end();
  m.validate();
  return m;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> p;
  for (const auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) p.push_back(layer.weights(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) p.push_back(layer.bias(r));
  }
  return p;
}

void set_parameters(MlpModel& model, std::span<const double> params) {
  std::size_t k = 0;
  for (auto& layer : model.layers) {
    const auto need = static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    if (k + need > params.size()) fail(Errc::shape, "parameter vector too short");
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = params[k++];
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = params[k++];
  }
  if (k != params.size()) fail(Errc::shape, "parameter vector too long");
}

LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const std::uint32_t> labels) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    fail(Errc::shape, "one label per input row required");
  }
  std::vector<Eigen::MatrixXd> acts;
  std::vector<DenseLayer> grads;
  LossGradient out;
  out.loss = forward_backward(model, inputs.transpose(), labels, acts, grads);
  MlpModel shaped = model;
  shaped.layers = grads;
  out.gradient = flatten_parameters(shaped);
  return out;
}

double loss_only(const MlpModel& model, const Eigen::MatrixXd& inputs,
                 std::span<const std::uint32_t> labels) {
  std::vector<Eigen::MatrixXd> acts;
  forward(model, inputs.transpose(), acts);
  return cross_entropy(acts.back(), labels);
}

}  // namespace emsca
