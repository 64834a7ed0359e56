#pragma once

// One-class SVM (nu formulation, RBF kernel) for firmware-tampering
// detection. Fit on legitimate feature vectors only; negative decision
// values mark novel (suspected modified) behaviour.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emsca/dataset.hpp"
#include "emsca/signal_core.hpp"
#include "emsca/spectral_features.hpp"

namespace emsca {

struct NoveltyConfig {
  double nu = 0.1;
  /// nullopt selects the "scale" rule: gamma_factor / (feature_dim *
  /// variance of the standardized training matrix).
  std::optional<double> gamma;
  double gamma_factor = 1.0;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  std::size_t max_iterations = 100000;

  void validate() const;
};

struct NoveltyModel {
  std::size_t feature_dim = 0;
  double gamma = 0.0;
  double rho = 0.0;
  double nu = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  /// Row-major, in standardized feature space.
  std::vector<double> support_vectors;
  std::vector<double> coefficients;
  std::size_t training_rows = 0;
  std::size_t iterations = 0;
  /// Scores within this distance below zero sit on the boundary (solver
  /// tolerance) and count as inliers.
  double margin = 1e-6;

  std::size_t n_support() const noexcept { return coefficients.size(); }
  std::span<const double> support_vector(std::size_t i) const noexcept {
    return {support_vectors.data() + i * feature_dim, feature_dim};
  }
  void validate() const;
};

/// Labels of `legit` are ignored. Throws insufficient_data (< 10 rows),
/// degenerate_data (all rows identical) or solver (iteration cap reached).
NoveltyModel fit_novelty(const Dataset& legit, const NoveltyConfig& config);

/// Decision value; positive = inlier. Throws shape on dimension mismatch.
double novelty_score(const NoveltyModel& model, std::span<const double> features);
inline bool is_novel(const NoveltyModel& model, double score) { return score < -model.margin; }
std::vector<double> novelty_scores(const NoveltyModel& model, const Dataset& rows);

struct TamperVerdict {
  std::string id;
  double score = 0.0;
  bool novel = false;
};

struct TamperSummary {
  std::vector<TamperVerdict> verdicts;
  std::size_t inliers = 0;
  std::size_t outliers = 0;
  double flagged_fraction = 0.0;
};

/// make_features + score per trace. The verdict id is the trace label, or
/// "trace<i>" when unlabeled.
TamperSummary detect_tampering(const NoveltyModel& model, std::span<const IQTrace> traces,
                               const FeatureConfig& feature_config);

/// UTF-8 table (id, score, verdict) followed by a summary line.
std::string format_verdicts(const TamperSummary& summary);

// Model file: "EMSCAOCS" magic, u32 version, u32 feature_dim, u32 support
// vector count, u32 training rows, f64 gamma, rho, nu, margin, then the
// standardization means and stds, support vectors (row-major) and their
// coefficients. Little-endian throughout.
inline constexpr char kNoveltyMagic[9] = "EMSCAOCS";
inline constexpr std::uint32_t kNoveltyVersion = 1;

void save_novelty(const NoveltyModel& model, const std::filesystem::path& path);
NoveltyModel load_novelty(const std::filesystem::path& path);

}  // namespace emsca
