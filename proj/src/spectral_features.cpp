#include "emsca/spectral_features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <set>

#include "emsca/error.hpp"
#include "emsca/parallel.hpp"
#include "emsca/text.hpp"

namespace emsca {

void FeatureConfig::validate() const {
  if (!(segment_s > 0.0)) fail(Errc::invalid_argument, "segment_s must be positive");
  if (n_buckets == 0) fail(Errc::invalid_argument, "n_buckets must be positive");
}

FeatureConfig crypto_feature_config() {
  return {0.01, 500, Reduction::mean, Trim::middle_half, Window::none};
}

FeatureConfig program_feature_config() {
  return {0.01, 1000, Reduction::max, Trim::middle_half, Window::none};
}

std::string to_string(Reduction r) { return r == Reduction::mean ? "mean" : "max"; }

std::optional<Reduction> parse_reduction(std::string_view s) {
  if (s == "mean") return Reduction::mean;
  if (s == "max") return Reduction::max;
  return std::nullopt;
}

namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer alloc_buffer(std::size_t n) {
  auto* p = fftw_alloc_complex(n);
  if (!p) fail(Errc::io, "fftw allocation of " + std::to_string(n) + " points failed");
  return FftwBuffer(p);
}

// FFTW's planner is not thread-safe; execution with the new-array interface
// is. Plans are estimated (not measured) so the chosen algorithm, and with it
// every output bit, is the same on each run.
class PlanCache {
 public:
  fftw_plan forward(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto in = alloc_buffer(n);
    auto out = alloc_buffer(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_FORWARD,
                                   FFTW_ESTIMATE);
    if (!p) fail(Errc::io, "fftw could not plan a " + std::to_string(n) + "-point transform");
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::vector<double> fft_magnitude(std::span<const ComplexSample> segment, Window window) {
  const std::size_t n = segment.size();
  if (n == 0) fail(Errc::invalid_argument, "fft_magnitude of an empty segment");
  fftw_plan plan = plan_cache().forward(n);
  auto in = alloc_buffer(n);
  auto out = alloc_buffer(n);
  for (std::size_t k = 0; k < n; ++k) {
    double w = 1.0;
    if (window == Window::hann && n > 1) {
      w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                               static_cast<double>(n - 1));
    }
    in[k][0] = w * segment[k].real();
    in[k][1] = w * segment[k].imag();
  }
  fftw_execute_dft(plan, in.get(), out.get());

  std::vector<double> mag(n);
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = (i + n - half) % n;
    mag[i] = std::sqrt(out[src][0] * out[src][0] + out[src][1] * out[src][1]);
  }
  return mag;
}

std::vector<double> trim_middle_half(std::span<const double> spectrum) {
  const std::size_t len = spectrum.size();
  if (len < 4) fail(Errc::invalid_argument, "trim_middle_half needs at least 4 bins");
  return {spectrum.begin() + static_cast<std::ptrdiff_t>(len / 4),
          spectrum.begin() + static_cast<std::ptrdiff_t>(3 * len / 4)};
}

std::vector<BucketRange> bucket_ranges(std::size_t length, std::size_t n_buckets) {
  if (n_buckets == 0 || n_buckets > length) {
    fail(Errc::invalid_argument, "cannot split " + std::to_string(length) + " bins into " +
                                     std::to_string(n_buckets) + " buckets");
  }
  const std::size_t base = length / n_buckets;
  const std::size_t extra = length % n_buckets;
  std::vector<BucketRange> out(n_buckets);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    out[b] = {pos, pos + size};
    pos += size;
  }
  return out;
}

std::vector<double> bucketize(std::span<const double> spectrum, std::size_t n_buckets,
                              Reduction reduction) {
  const auto ranges = bucket_ranges(spectrum.size(), n_buckets);
  std::vector<double> out(n_buckets);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const auto first = spectrum.begin() + static_cast<std::ptrdiff_t>(ranges[b].begin);
    const auto last = spectrum.begin() + static_cast<std::ptrdiff_t>(ranges[b].end);
    if (reduction == Reduction::max) {
      out[b] = *std::max_element(first, last);
    } else {
      double sum = 0.0;
      for (auto it = first; it != last; ++it) sum += *it;
      out[b] = sum / static_cast<double>(ranges[b].end - ranges[b].begin);
    }
  }
  return out;
}

std::vector<double> make_feature_values(std::span<const ComplexSample> samples,
                                        double sample_rate_hz, const FeatureConfig& config) {
  config.validate();
  const auto need = static_cast<std::size_t>(std::llround(config.segment_s * sample_rate_hz));
  if (need == 0 || samples.size() < need) {
    fail(Errc::insufficient_data,
         "trace holds " + text::format_double(static_cast<double>(samples.size()) / sample_rate_hz) +
             " s, feature segment needs " + text::format_double(config.segment_s) + " s");
  }
  auto spectrum = fft_magnitude(samples.first(need), config.window);
  if (config.trim == Trim::middle_half) spectrum = trim_middle_half(spectrum);
  return bucketize(spectrum, config.n_buckets, config.reduction);
}

FeatureVector make_features(const IQTrace& trace, const FeatureConfig& config) {
  FeatureVector fv;
  fv.values = make_feature_values(trace.samples, trace.sample_rate_hz, config);
  fv.config = config;
  fv.source_label = trace.label;
  return fv;
}

Dataset assemble_dataset(std::span<const FeatureVector> features) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!features[i].source_label) {
      fail(Errc::missing_label, "feature row " + std::to_string(i) + " has no label");
    }
    names.insert(*features[i].source_label);
  }
  Dataset d;
  d.class_table.assign(names.begin(), names.end());
  if (!features.empty()) d.feature_dim = features.front().values.size();
  for (const auto& fv : features) {
    const auto it = std::lower_bound(d.class_table.begin(), d.class_table.end(), *fv.source_label);
    d.add_row(fv.values, static_cast<std::uint32_t>(it - d.class_table.begin()));
  }
  return d;
}

Dataset batch_features(std::span<const IQTrace> traces, const FeatureConfig& config) {
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!traces[i].label || traces[i].label->empty()) {
      fail(Errc::missing_label,
           "trace " + std::to_string(i) +
               (traces[i].seed ? " (seed " + std::to_string(*traces[i].seed) + ")" : "") +
               " has no label");
    }
  }
  std::vector<FeatureVector> rows(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) { rows[i] = make_features(traces[i], config); });
  return assemble_dataset(rows);
}

}  // namespace emsca
