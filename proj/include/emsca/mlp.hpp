#pragma once

// Fully-connected feed-forward classifier: standardized inputs, tanh hidden
// layers, softmax output, trained by mini-batch gradient descent with
// momentum on the mean cross-entropy.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emsca/dataset.hpp"

namespace emsca {

enum class Activation : std::uint8_t { tanh = 1, logistic = 2 };

struct MlpConfig {
  std::vector<std::size_t> hidden_layers{10, 5};
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool standardize = true;
  Activation activation = Activation::tanh;
  /// Stop once |loss(e) - loss(e - patience)| < early_stop_tol.
  double early_stop_tol = 1e-6;
  std::size_t early_stop_patience = 10;

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct MlpModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::tanh;
  std::vector<double> feature_mean;  // empty when not standardizing
  std::vector<double> feature_std;
  std::vector<std::string> class_table;

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  /// [input, hidden..., output]
  std::vector<std::size_t> topology() const;
  void validate() const;
};

/// Zero weights, identity standardization; mostly for tests and tooling.
MlpModel make_model(std::span<const std::size_t> topology,
                    std::vector<std::string> class_table,
                    Activation activation = Activation::tanh);

struct TrainLog {
  std::vector<double> epoch_loss;
  bool early_stopped = false;
};

MlpModel train(const Dataset& dataset, const MlpConfig& config, TrainLog* log = nullptr);

struct Prediction {
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<double> scores;  // softmax, sums to 1
};

Prediction predict(const MlpModel& model, std::span<const double> features);
/// Batched argmax for every row of `dataset` (lowest index wins ties).
std::vector<std::size_t> predict_classes(const MlpModel& model, const Dataset& dataset);

struct ClassificationReport {
  std::vector<std::string> class_table;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t total = 0;
};

ClassificationReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                           std::vector<std::string> class_table);

/// Throws incompatible_dataset when the class tables differ.
ClassificationReport evaluate(const MlpModel& model, const Dataset& dataset);

struct CrossValReport {
  std::size_t k = 0;
  std::vector<double> fold_accuracies;
  std::vector<double> fold_macro_f1;
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;  // 1.96 * sample stddev / sqrt(k)
  double mean_macro_f1 = 0.0;
  double f1_ci95_halfwidth = 0.0;
  /// Confusion pooled over all held-out folds.
  ClassificationReport pooled;
};

/// Per-class seeded shuffle, then round-robin assignment; returns k disjoint
/// index lists covering every row.
std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& dataset, std::size_t k,
                                                       std::uint64_t seed);

/// 1.96 * sample standard deviation / sqrt(n); 0 when n < 2.
double ci95_halfwidth(std::span<const double> values);

/// Folds are trained independently (in parallel when workers allow) and
/// merged in fold order. Throws insufficient_samples naming the first class
/// with fewer than k rows.
CrossValReport cross_validate(const Dataset& dataset, const MlpConfig& config, std::size_t k = 10);

// Model file: "EMSCAMLP" magic, u32 version, u32 layer-dimension count and the
// dimensions ([500, 10, 5, 4] style), u8 activation, u32 class count and
// length-prefixed class names, u8 standardize flag with input means and stds,
// then per layer the row-major weights and biases. All integers little-endian,
// all reals IEEE float64.
inline constexpr char kMlpMagic[9] = "EMSCAMLP";
inline constexpr std::uint32_t kMlpVersion = 1;

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

// Gradient-check surface. Parameters are flattened layer by layer, weights
// (row-major) then biases.
std::vector<double> flatten_parameters(const MlpModel& model);
void set_parameters(MlpModel& model, std::span<const double> params);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean cross-entropy and its analytic gradient over `inputs` (one sample per
/// row, already standardized).
LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const std::uint32_t> labels);
double loss_only(const MlpModel& model, const Eigen::MatrixXd& inputs,
                 std::span<const std::uint32_t> labels);

}  // namespace emsca
