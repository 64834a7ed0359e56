#include <doctest.h>

#include <cstring>
#include <fstream>

#include "emsca/signal_core.hpp"
#include "emsca/text.hpp"
#include "helpers.hpp"

using namespace emsca;
using testing::error_code_of;
using testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

IQTrace ramp_trace(std::size_t n, double rate) {
  IQTrace t;
  t.sample_rate_hz = rate;
  t.center_freq_hz = 1.4e9;
  for (std::size_t i = 0; i < n; ++i) {
    t.samples.emplace_back(static_cast<float>(i), -static_cast<float>(i));
  }
  return t;
}

}  // namespace

TEST_SUITE("signal-core") {

TEST_CASE("hand-encoded little-endian payload decodes to its samples") {
  TempDir dir("sc");
  // 1.0f = 0x3f800000, -1.0f = 0xbf800000, written byte by byte.
  write_bytes(dir / "x.cf32", {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x00,
                               0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0xbf});
  const IQTrace t = read_trace(dir / "x.cf32", TraceDefaults{20e6, 0.0});
  REQUIRE(t.size() == 2);
  CHECK(t.samples[0] == ComplexSample(1.0f, 0.0f));
  CHECK(t.samples[1] == ComplexSample(0.0f, -1.0f));
  CHECK(t.sample_rate_hz == 20e6);
}

TEST_CASE("empty payload is a zero-length trace") {
  TempDir dir("sc");
  write_bytes(dir / "e.cf32", {});
  const IQTrace t = read_trace(dir / "e.cf32", TraceDefaults{20e6, 0.0});
  CHECK(t.size() == 0);
  CHECK(t.duration_s() == 0.0);
}

TEST_CASE("truncated and non-finite payloads are rejected") {
  TempDir dir("sc");
  write_bytes(dir / "t.cf32", std::vector<unsigned char>(15, 0));
  CHECK(error_code_of([&] { read_trace(dir / "t.cf32", TraceDefaults{1e6, 0.0}); }) ==
        Errc::malformed_trace);

  std::vector<ComplexSample> s(5, {1.0f, 1.0f});
  s[3] = {0.0f, std::numeric_limits<float>::quiet_NaN()};
  std::vector<std::byte> bytes;
  encode_cf32(s, bytes);
  const std::string msg = testing::error_message_of([&] { decode_cf32(bytes); });
  CHECK(msg.find('3') != std::string::npos);
  CHECK(error_code_of([&] { decode_cf32(bytes); }) == Errc::corrupt_sample);
}

TEST_CASE("payload without sidecar needs a caller-supplied rate") {
  TempDir dir("sc");
  write_bytes(dir / "n.cf32", std::vector<unsigned char>(16, 0));
  CHECK(error_code_of([&] { read_trace(dir / "n.cf32"); }) == Errc::invalid_argument);
}

TEST_CASE("write then read is bit-exact in samples and metadata") {
  TempDir dir("sc");
  IQTrace t;
  t.samples = testing::random_samples(1000, 3);
  t.samples[7] = {-0.0f, std::numeric_limits<float>::denorm_min()};
  t.sample_rate_hz = 20e6;
  t.center_freq_hz = 288e6;
  t.label = "prog3";
  t.seed = 0xfedcba9876543210ULL;
  t.captured_at = "2024-05-01T12:00:00Z";
  t.extra["antenna"] = "loop probe";
  write_trace(t, dir / "r.cf32");
  const IQTrace back = read_trace(dir / "r.cf32");
  CHECK(back == t);
  CHECK(std::memcmp(back.samples.data(), t.samples.data(), t.samples.size() * 8) == 0);
  CHECK(std::filesystem::file_size(dir / "r.cf32") == 8000);
  CHECK(std::filesystem::exists(sidecar_path(dir / "r.cf32")));

  IQTrace two = t.with_samples({{1, 2}, {3, 4}});
  write_trace(two, dir / "two.cf32");
  CHECK(std::filesystem::file_size(dir / "two.cf32") == 16);
}

TEST_CASE("unknown sidecar keys survive a rewrite") {
  TempDir dir("sc");
  write_bytes(dir / "u.cf32", std::vector<unsigned char>(8, 0));
  text::write_file(dir / "u.cf32.meta", "sample_rate_hz=1000000\ncenter_freq_hz=0\ngain_db=31.5\n");
  const IQTrace t = read_trace(dir / "u.cf32");
  write_trace(t, dir / "v.cf32");
  CHECK(read_trace(dir / "v.cf32").extra.at("gain_db") == "31.5");
}

TEST_CASE("segment takes an exact contiguous slice") {
  const IQTrace t = ramp_trace(500000, 20e6);  // 25 ms
  CHECK(segment(t, 0.0, t.duration_s()) == t);
  CHECK(segment(t, 0.0, 0.010).size() == 200000);

  const IQTrace s = segment(t, 0.005, 0.005);
  REQUIRE(s.size() == 100000);
  for (std::size_t i = 0; i < s.size(); i += 997) CHECK(s.samples[i] == t.samples[100000 + i]);
  CHECK(s.center_freq_hz == t.center_freq_hz);

  CHECK(error_code_of([&] { segment(t, 0.02, 0.01); }) == Errc::out_of_range);
  CHECK(error_code_of([&] { segment(t, -0.001, 0.001); }) == Errc::out_of_range);
}

TEST_CASE("resample ratios") {
  const auto r4 = resample_ratio(20e6, 4e6);
  CHECK(r4.up == 1);
  CHECK(r4.down == 5);
  const auto r16 = resample_ratio(20e6, 16e6);
  CHECK(r16.up == 4);
  CHECK(r16.down == 5);
  const auto r3 = resample_ratio(20e6, 3e6);
  CHECK(r3.up == 3);
  CHECK(r3.down == 20);
  CHECK(error_code_of([] { resample_ratio(20e6, 2.718281828e6); }) == Errc::unsupported_ratio);
  CHECK(error_code_of([] { resample_ratio(4e6, 20e6); }) == Errc::invalid_argument);
  CHECK(error_code_of([] { resample_ratio(4e6, 0.0); }) == Errc::invalid_argument);
}

TEST_CASE("downsample to the same rate returns the samples unchanged") {
  IQTrace t = ramp_trace(1000, 4e6);
  CHECK(downsample(t, 4e6) == t);
}

TEST_CASE("in-band tone keeps its magnitude through every ladder rate") {
  IQTrace t;
  t.sample_rate_hz = 20e6;
  t.samples = testing::tone(200000, 0.1e6, 20e6);
  const double before = testing::tone_amplitude(t.samples, 0.1e6, 20e6);
  for (double rate : {16e6, 12e6, 8e6, 4e6, 3e6, 2e6, 1e6, 0.5e6}) {
    CAPTURE(rate);
    const IQTrace d = downsample(t, rate);
    const auto ratio = resample_ratio(20e6, rate);
    CHECK(d.size() == t.size() * ratio.up / ratio.down);
    CHECK(d.sample_rate_hz == rate);
    const double after = testing::tone_amplitude(d.samples, 0.1e6, rate);
    CHECK(std::abs(after / before - 1.0) < 0.01);
  }
}

TEST_CASE("tone beyond the new band is attenuated by at least 40 dB") {
  IQTrace t;
  t.sample_rate_hz = 20e6;
  t.samples = testing::tone(200000, 3.0e6, 20e6);
  const IQTrace d = downsample(t, 4e6);
  // 3 MHz folds to -1 MHz at 4 MHz.
  const double residual = testing::tone_amplitude(d.samples, -1.0e6, 4e6);
  CHECK(20.0 * std::log10(residual) <= -40.0);
}

TEST_CASE("two-step decimation agrees with one step on passband tones") {
  IQTrace t;
  t.sample_rate_hz = 20e6;
  t.samples = testing::tone(400000, 0.3e6, 20e6);
  const IQTrace one = downsample(t, 5e6);
  const IQTrace two = downsample(downsample(t, 10e6), 5e6);
  const double a = testing::tone_amplitude(one.samples, 0.3e6, 5e6);
  const double b = testing::tone_amplitude(two.samples, 0.3e6, 5e6);
  CHECK(std::abs(a / b - 1.0) < 0.02);
}

TEST_CASE("anti-alias prototype has the documented DC gain") {
  const ResampleRatio r{4, 5};
  const auto h = design_anti_alias_filter(r, {});
  double sum = 0.0;
  for (float v : h) sum += v;
  CHECK(sum == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(h.size() % 2 == 1);
  CHECK(h.size() >= 129);
}

TEST_CASE("storage arithmetic") {
  const auto b = storage_budget(20e6, 60.0);
  CHECK(b.total_bytes == 9600000000ULL);
  CHECK(b.total_samples == 1200000000ULL);
  CHECK(b.gib_text() == "8.94 GiB");
  CHECK(b.gb_text() == "9.60 GB");
  CHECK(storage_budget(20e6, 0.0).total_bytes == 0);
  const auto b4 = storage_budget(4e6, 60.0);
  CHECK(b4.total_bytes == 1920000000ULL);
  CHECK(static_cast<double>(b4.total_bytes) / static_cast<double>(b.total_bytes) == doctest::Approx(0.2));
  // Whole samples only.
  CHECK(storage_budget(3.0, 0.5).total_bytes == 8);
  CHECK(storage_budget(20e6, 0.025).total_bytes * 6000 == 24000000000ULL);
}

}  // TEST_SUITE
