#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emsca {

/// One I/Q sample, stored as two 32-bit floats (i = real, q = imag).
using ComplexSample = std::complex<float>;

inline constexpr std::size_t kBytesPerSample = 8;

/// A complex-baseband capture plus the metadata needed to interpret it.
struct IQTrace {
  std::vector<ComplexSample> samples;
  double sample_rate_hz = 0.0;
  double center_freq_hz = 0.0;
  std::optional<std::string> label;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> captured_at;  // RFC-3339
  /// Sidecar keys this version does not interpret; kept verbatim on rewrite.
  std::map<std::string, std::string> extra;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  std::uint64_t payload_bytes() const noexcept {
    return samples.size() * kBytesPerSample;
  }

  /// Copy of every field except the samples.
  IQTrace with_samples(std::vector<ComplexSample> s) const;

  friend bool operator==(const IQTrace&, const IQTrace&) = default;
};

/// Rate and tuning used when a payload has no sidecar.
struct TraceDefaults {
  double sample_rate_hz = 0.0;
  double center_freq_hz = 0.0;
};

std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Reads `<path>` as raw little-endian cf32 and `<path>.meta` when present.
/// Without a sidecar, `defaults` must supply the sample rate.
IQTrace read_trace(const std::filesystem::path& path,
                   const std::optional<TraceDefaults>& defaults = std::nullopt);

/// Writes the payload and always writes the sidecar.
void write_trace(const IQTrace& trace, const std::filesystem::path& path);

/// Decodes a cf32 byte buffer. Throws malformed_trace when the length is not
/// a multiple of 8, corrupt_sample on the first non-finite value.
std::vector<ComplexSample> decode_cf32(std::span<const std::byte> bytes);
void encode_cf32(std::span<const ComplexSample> samples,
                 std::vector<std::byte>& out);

/// Throws corrupt_sample naming the first non-finite sample index.
void check_finite(std::span<const ComplexSample> samples);

/// Contiguous sub-trace starting at start_s; round(duration_s * rate) samples.
IQTrace segment(const IQTrace& trace, double start_s, double duration_s);

/// Sample-rate reduction ratio target/source = up/down in lowest terms.
struct ResampleRatio {
  std::uint32_t up = 1;
  std::uint32_t down = 1;
};

/// Finds up/down with up <= max_up such that source * up == target * down
/// (to 1e-9 relative). Throws unsupported_ratio when none exists and
/// invalid_argument when target is not in (0, source].
ResampleRatio resample_ratio(double source_rate_hz, double target_rate_hz,
                             std::uint32_t max_up = 64);

struct DownsampleOptions {
  /// Minimum FIR length. Longer filters are used when the decimation factor
  /// needs a narrower transition band (see anti_alias_taps).
  std::size_t taps = 129;
  /// Passband edge as a fraction of the output sample rate.
  double cutoff_fraction = 0.45;
};

/// FIR length actually used for a given decimation factor.
std::size_t anti_alias_taps(const DownsampleOptions& options,
                            std::uint32_t down);

/// Hamming-windowed sinc low-pass prototype at up * source_rate with its
/// cutoff at cutoff_fraction * target rate; DC gain equals `up`.
std::vector<float> design_anti_alias_filter(ResampleRatio ratio,
                                            const DownsampleOptions& options);

/// Anti-alias filtering then decimation by the reduced ratio. Integer ratios
/// run a decimating FIR; the others run a polyphase up/down resampler. The
/// filter is centred (zero group delay), so output sample m aligns with input
/// time m / target_rate. Output length is floor(n * up / down).
IQTrace downsample(const IQTrace& trace, double target_rate_hz,
                   const DownsampleOptions& options = {});

struct StorageBudget {
  std::uint64_t bytes_per_sample = kBytesPerSample;
  double sample_rate_hz = 0.0;
  double duration_s = 0.0;
  std::uint64_t total_samples = 0;
  std::uint64_t total_bytes = 0;

  double gib() const noexcept;  // total_bytes / 2^30
  double gb() const noexcept;   // total_bytes / 1e9
  std::string gib_text() const;  // "8.94 GiB"
  std::string gb_text() const;   // "9.60 GB"
};

StorageBudget storage_budget(double sample_rate_hz, double duration_s);

}  // namespace emsca
