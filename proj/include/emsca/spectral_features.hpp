#pragma once

// Trace segment -> fixed-length spectral feature vector:
//   first segment_s seconds -> |DFT| (DC centred) -> middle half -> buckets.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emsca/dataset.hpp"
#include "emsca/signal_core.hpp"

namespace emsca {

enum class Reduction { mean, max };
enum class Trim { middle_half, none };
/// Optional taper before the transform; off unless asked for.
enum class Window { none, hann };

struct FeatureConfig {
  double segment_s = 0.01;
  std::size_t n_buckets = 500;
  Reduction reduction = Reduction::mean;
  Trim trim = Trim::middle_half;
  Window window = Window::none;

  void validate() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// 500 mean-buckets over the middle half (cryptographic workloads).
FeatureConfig crypto_feature_config();
/// 1000 max-buckets over the middle half (looping firmware programs).
FeatureConfig program_feature_config();

std::string to_string(Reduction r);
std::optional<Reduction> parse_reduction(std::string_view s);

struct FeatureVector {
  std::vector<double> values;
  FeatureConfig config;
  std::optional<std::string> source_label;
};

/// |DFT| of the segment, rotated so bin N/2 (integer division) is DC and
/// bin i is frequency (i - N/2) * rate / N. Throws invalid_argument on empty
/// input.
std::vector<double> fft_magnitude(std::span<const ComplexSample> segment,
                                  Window window = Window::none);

/// Elements [floor(L/4), floor(3L/4)). Throws invalid_argument for L < 4.
std::vector<double> trim_middle_half(std::span<const double> spectrum);

struct BucketRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// n_buckets contiguous ranges tiling [0, length); the first
/// length % n_buckets ranges hold one extra element.
std::vector<BucketRange> bucket_ranges(std::size_t length, std::size_t n_buckets);

std::vector<double> bucketize(std::span<const double> spectrum, std::size_t n_buckets,
                              Reduction reduction);

/// Runs the full chain on the first config.segment_s seconds. Throws
/// insufficient_data when the trace is shorter than the segment.
FeatureVector make_features(const IQTrace& trace, const FeatureConfig& config);

/// Same chain on raw samples (the segment is taken from the front).
std::vector<double> make_feature_values(std::span<const ComplexSample> samples,
                                        double sample_rate_hz, const FeatureConfig& config);

/// One row per trace, input order preserved; the class table is the sorted
/// set of labels. Throws missing_label naming the first unlabeled trace.
Dataset batch_features(std::span<const IQTrace> traces, const FeatureConfig& config);

/// Builds a dataset from already-extracted vectors (sorted class table).
Dataset assemble_dataset(std::span<const FeatureVector> features);

}  // namespace emsca
