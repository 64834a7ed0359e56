#include "emsca/signal_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "byte_io.hpp"
#include "emsca/error.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace fs = std::filesystem;

IQTrace IQTrace::with_samples(std::vector<ComplexSample> s) const {
  IQTrace out;
  out.samples = std::move(s);
  out.sample_rate_hz = sample_rate_hz;
  out.center_freq_hz = center_freq_hz;
  out.label = label;
  out.seed = seed;
  out.captured_at = captured_at;
  out.extra = extra;
  return out;
}

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".meta";
  return p;
}

void check_finite(std::span<const ComplexSample> samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].real()) || !std::isfinite(samples[i].imag())) {
      fail(Errc::corrupt_sample,
           "non-finite sample at index " + std::to_string(i));
    }
  }
}

std::vector<ComplexSample> decode_cf32(std::span<const std::byte> bytes) {
  if (bytes.size() % kBytesPerSample != 0) {
    fail(Errc::malformed_trace,
         "payload length " + std::to_string(bytes.size()) +
             " is not a multiple of 8 bytes");
  }
  std::vector<ComplexSample> out(bytes.size() / kBytesPerSample);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), bytes.data(), bytes.size());
  } else {
    for (std::size_t k = 0; k < out.size(); ++k) {
      std::uint32_t re, im;
      std::memcpy(&re, bytes.data() + 8 * k, 4);
      std::memcpy(&im, bytes.data() + 8 * k + 4, 4);
      out[k] = {std::bit_cast<float>(detail::to_little(re)),
                std::bit_cast<float>(detail::to_little(im))};
    }
  }
  check_finite(out);
  return out;
}

void encode_cf32(std::span<const ComplexSample> samples,
                 std::vector<std::byte>& out) {
  out.resize(samples.size() * kBytesPerSample);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), samples.data(), out.size());
  } else {
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto re = detail::to_little(std::bit_cast<std::uint32_t>(samples[k].real()));
      const auto im = detail::to_little(std::bit_cast<std::uint32_t>(samples[k].imag()));
      std::memcpy(out.data() + 8 * k, &re, 4);
      std::memcpy(out.data() + 8 * k + 4, &im, 4);
    }
  }
}

namespace {

void parse_sidecar(const fs::path& meta, IQTrace& trace, bool& have_rate) {
  const std::string body = text::read_file(meta);
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(Errc::malformed_trace, meta.string() + ":" + std::to_string(line_no) +
                                      ": expected key=value");
    }
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));
    auto bad = [&] {
      fail(Errc::malformed_trace, meta.string() + ":" + std::to_string(line_no) +
                                      ": bad value for " + key);
    };
    if (key == "sample_rate_hz") {
      auto v = text::parse_double(value);
      if (!v || !(*v > 0.0) || !std::isfinite(*v)) bad();
      trace.sample_rate_hz = *v;
      have_rate = true;
    } else if (key == "center_freq_hz") {
      auto v = text::parse_double(value);
      if (!v || *v < 0.0 || !std::isfinite(*v)) bad();
      trace.center_freq_hz = *v;
    } else if (key == "label") {
      trace.label = std::string(value);
    } else if (key == "seed") {
      auto v = text::parse_u64(value);
      if (!v) bad();
      trace.seed = *v;
    } else if (key == "captured_at") {
      trace.captured_at = std::string(value);
    } else {
      trace.extra[key] = std::string(value);
    }
  }
}

}  // namespace

IQTrace read_trace(const fs::path& path,
                   const std::optional<TraceDefaults>& defaults) {
  const std::string payload = text::read_file(path);
  IQTrace trace;
  trace.samples = decode_cf32(std::span(
      reinterpret_cast<const std::byte*>(payload.data()), payload.size()));
  bool have_rate = false;
  if (defaults) {
    trace.sample_rate_hz = defaults->sample_rate_hz;
    trace.center_freq_hz = defaults->center_freq_hz;
    have_rate = defaults->sample_rate_hz > 0.0;
  }
  const fs::path meta = sidecar_path(path);
  if (fs::exists(meta)) parse_sidecar(meta, trace, have_rate);
  if (!have_rate) {
    fail(Errc::invalid_argument,
         path.string() + ": no sidecar and no sample rate supplied");
  }
  return trace;
}

void write_trace(const IQTrace& trace, const fs::path& path) {
  check_finite(trace.samples);
  std::vector<std::byte> bytes;
  encode_cf32(trace.samples, bytes);
  text::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                          bytes.size()));

  std::ostringstream meta;
  meta << "sample_rate_hz=" << text::format_double(trace.sample_rate_hz) << '\n'
       << "center_freq_hz=" << text::format_double(trace.center_freq_hz) << '\n';
  if (trace.label) meta << "label=" << *trace.label << '\n';
  if (trace.seed) meta << "seed=" << *trace.seed << '\n';
  if (trace.captured_at) meta << "captured_at=" << *trace.captured_at << '\n';
  for (const auto& [k, v] : trace.extra) meta << k << '=' << v << '\n';
  text::write_file(sidecar_path(path), meta.str());
}

IQTrace segment(const IQTrace& trace, double start_s, double duration_s) {
  const double available = trace.duration_s();
  const double half_sample = 0.5 / trace.sample_rate_hz;
  auto out_of_range = [&] {
    fail(Errc::out_of_range,
         "segment [" + text::format_double(start_s) + " s, +" +
             text::format_double(duration_s) + " s) exceeds trace duration " +
             text::format_double(available) + " s");
  };
  if (!(start_s >= 0.0) || !(duration_s >= 0.0) ||
      start_s + duration_s > available + half_sample) {
    out_of_range();
  }
  const auto first = static_cast<std::size_t>(std::llround(start_s * trace.sample_rate_hz));
  const auto count = static_cast<std::size_t>(std::llround(duration_s * trace.sample_rate_hz));
  if (first + count > trace.size()) out_of_range();
  return trace.with_samples(std::vector<ComplexSample>(
      trace.samples.begin() + static_cast<std::ptrdiff_t>(first),
      trace.samples.begin() + static_cast<std::ptrdiff_t>(first + count)));
}

ResampleRatio resample_ratio(double source_rate_hz, double target_rate_hz,
                             std::uint32_t max_up) {
  if (!(source_rate_hz > 0.0) || !(target_rate_hz > 0.0)) {
    fail(Errc::invalid_argument, "sample rates must be positive");
  }
  if (target_rate_hz > source_rate_hz * (1.0 + 1e-12)) {
    fail(Errc::invalid_argument,
         "target rate " + text::format_double(target_rate_hz) +
             " Hz exceeds source rate " + text::format_double(source_rate_hz) + " Hz");
  }
  for (std::uint32_t up = 1; up <= max_up; ++up) {
    const double down = std::round(up * source_rate_hz / target_rate_hz);
    if (down < 1.0 || down > 1e6) continue;
    if (std::abs(source_rate_hz * up - target_rate_hz * down) <=
        1e-9 * source_rate_hz * up) {
      const auto d = static_cast<std::uint32_t>(down);
      const auto g = std::gcd(up, d);
      return {up / g, d / g};
    }
  }
  fail(Errc::unsupported_ratio,
       "cannot resample " + text::format_double(source_rate_hz) + " Hz to " +
           text::format_double(target_rate_hz) + " Hz with an interpolation factor <= " +
           std::to_string(max_up));
}

std::size_t anti_alias_taps(const DownsampleOptions& options, std::uint32_t down) {
  // A Hamming transition band is ~3.3 / taps of the prototype rate; keeping it
  // at a fixed fraction of the output band needs taps proportional to `down`.
  std::size_t taps = std::max<std::size_t>(options.taps, 32u * down + 1u);
  if (taps % 2 == 0) ++taps;
  return taps;
}

std::vector<float> design_anti_alias_filter(ResampleRatio ratio,
                                            const DownsampleOptions& options) {
  if (!(options.cutoff_fraction > 0.0 && options.cutoff_fraction < 0.5)) {
    fail(Errc::invalid_argument, "cutoff_fraction must lie in (0, 0.5)");
  }
  const std::size_t n = anti_alias_taps(options, ratio.down);
  // Cutoff relative to the prototype rate (up * source): cutoff_fraction * target
  // = cutoff_fraction * up * source / down.
  const double fc = options.cutoff_fraction / static_cast<double>(ratio.down);
  const double mid = static_cast<double>(n - 1) / 2.0;
  std::vector<double> h(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) - mid;
    const double arg = 2.0 * fc * x;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                            static_cast<double>(n - 1));
    h[k] = 2.0 * fc * sinc * w;
    sum += h[k];
  }
  std::vector<float> out(n);
  const double gain = static_cast<double>(ratio.up) / sum;
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<float>(h[k] * gain);
  return out;
}

IQTrace downsample(const IQTrace& trace, double target_rate_hz,
                   const DownsampleOptions& options) {
  const ResampleRatio ratio = resample_ratio(trace.sample_rate_hz, target_rate_hz);
  if (ratio.up == 1 && ratio.down == 1) return trace;

  const std::vector<float> h = design_anti_alias_filter(ratio, options);
  const std::size_t up = ratio.up;
  const std::size_t down = ratio.down;
  const std::size_t n_taps = h.size();
  const std::size_t delay = (n_taps - 1) / 2;
  const std::size_t n_in = trace.size();
  const std::size_t n_out = n_in * up / down;

  // Polyphase branches, each reversed so the dot product walks the input
  // forwards: branch p holds h[p], h[p + up], ... zero-padded to branch_len.
  const std::size_t branch_len = (n_taps + up - 1) / up;
  std::vector<float> branches(up * branch_len, 0.0f);
  for (std::size_t p = 0; p < up; ++p) {
    for (std::size_t i = 0; p + i * up < n_taps; ++i) {
      branches[p * branch_len + (branch_len - 1 - i)] = h[p + i * up];
    }
  }

  // De-interleaved, zero-padded copies of the input.
  const std::size_t pad_left = branch_len;
  const std::size_t pad_right = delay / up + 2;
  std::vector<float> re(pad_left + n_in + pad_right, 0.0f);
  std::vector<float> im(re.size(), 0.0f);
  for (std::size_t k = 0; k < n_in; ++k) {
    re[pad_left + k] = trace.samples[k].real();
    im[pad_left + k] = trace.samples[k].imag();
  }

  std::vector<ComplexSample> out(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const std::size_t pos = m * down + delay;  // position on the upsampled grid
    const std::size_t phase = pos % up;
    const std::size_t newest = pos / up;  // input index aligned with the branch tail
    const float* g = branches.data() + phase * branch_len;
    const std::size_t first = pad_left + newest + 1 - branch_len;
    const float* xr = re.data() + first;
    const float* xi = im.data() + first;
    float acc_r = 0.0f;
    float acc_i = 0.0f;
#pragma omp simd reduction(+ : acc_r, acc_i)
    for (std::size_t k = 0; k < branch_len; ++k) {
      acc_r += g[k] * xr[k];
      acc_i += g[k] * xi[k];
    }
    out[m] = {acc_r, acc_i};
  }

  IQTrace result = trace.with_samples(std::move(out));
  result.sample_rate_hz = target_rate_hz;
  return result;
}

double StorageBudget::gib() const noexcept {
  return static_cast<double>(total_bytes) / 1073741824.0;
}

double StorageBudget::gb() const noexcept {
  return static_cast<double>(total_bytes) / 1e9;
}

std::string StorageBudget::gib_text() const { return text::format_fixed(gib(), 2) + " GiB"; }

std::string StorageBudget::gb_text() const { return text::format_fixed(gb(), 2) + " GB"; }

StorageBudget storage_budget(double sample_rate_hz, double duration_s) {
  if (!(sample_rate_hz > 0.0) || !(duration_s >= 0.0) || !std::isfinite(duration_s)) {
    fail(Errc::invalid_argument, "storage_budget needs a positive rate and non-negative duration");
  }
  StorageBudget b;
  b.sample_rate_hz = sample_rate_hz;
  b.duration_s = duration_s;
  // Products such as 0.1 * 3e6 land a hair under the integer; absorb that
  // representation error before flooring.
  const double exact = sample_rate_hz * duration_s;
  b.total_samples = static_cast<std::uint64_t>(std::floor(exact * (1.0 + 1e-12)));
  b.total_bytes = b.total_samples * b.bytes_per_sample;
  return b;
}

}  // namespace emsca
