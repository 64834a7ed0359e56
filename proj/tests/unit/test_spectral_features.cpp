#include <doctest.h>

#include <algorithm>
#include <chrono>

#include "emsca/emitter_sim.hpp"
#include "emsca/spectral_features.hpp"
#include "emsca/text.hpp"
#include "helpers.hpp"

using namespace emsca;
using testing::error_code_of;

TEST_SUITE("spectral-features") {

TEST_CASE("fft magnitude matches a naive DFT") {
  for (std::size_t n : {16u, 256u, 4096u, 15u, 1000u}) {
    CAPTURE(n);
    const auto x = testing::random_samples(n, n);
    const auto fast = fft_magnitude(x);
    const auto slow = testing::naive_dft_magnitude(x);
    REQUIRE(fast.size() == n);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]) / slow[k]);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("constant and pure-exponential inputs") {
  const std::size_t n = 64;
  std::vector<ComplexSample> dc(n, {1.0f, 0.0f});
  const auto m = fft_magnitude(dc);
  CHECK(m[n / 2] == doctest::Approx(64.0));
  for (std::size_t k = 0; k < n; ++k) {
    if (k != n / 2) CHECK(m[k] < 1e-9);
  }
  // e^{j 2 pi 5 t / n} lands 5 bins right of DC; e^{-j...} 5 bins left.
  for (int k : {5, -5, 31, -32}) {
    CAPTURE(k);
    const auto x = testing::tone(n, static_cast<double>(k), static_cast<double>(n));
    const auto mk = fft_magnitude(x);
    const auto peak = static_cast<std::size_t>(std::max_element(mk.begin(), mk.end()) - mk.begin());
    CHECK(peak == static_cast<std::size_t>(static_cast<int>(n / 2) + k));
    CHECK(mk[peak] == doctest::Approx(64.0).epsilon(1e-6));
  }
  CHECK(error_code_of([] { fft_magnitude({}); }) == Errc::invalid_argument);
}

TEST_CASE("Parseval") {
  const auto x = testing::random_samples(2000, 77);
  const auto m = fft_magnitude(x);
  double e_time = 0.0, e_freq = 0.0;
  for (const auto& s : x) e_time += std::norm(std::complex<double>(s));
  for (double v : m) e_freq += v * v;
  CHECK(e_freq / (2000.0 * e_time) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("middle-half trim") {
  CHECK(trim_middle_half(std::vector<double>(200000, 1.0)).size() == 100000);
  CHECK(trim_middle_half(std::vector<double>{1, 2, 3, 4}) == std::vector<double>{2, 3});
  CHECK(trim_middle_half(std::vector<double>{1, 2, 3, 4, 5, 6, 7}) == std::vector<double>{2, 3, 4, 5});
  Rng rng(5);
  std::vector<double> v(1000);
  for (auto& e : v) e = rng.uniform();
  const auto t = trim_middle_half(v);
  CHECK(t == std::vector<double>(v.begin() + 250, v.begin() + 750));
  CHECK(error_code_of([] { trim_middle_half(std::vector<double>{1, 2, 3}); }) == Errc::invalid_argument);
}

TEST_CASE("bucketize by hand") {
  const std::vector<double> s{1, 2, 3, 4, 5, 6};
  CHECK(bucketize(s, 2, Reduction::mean) == std::vector<double>{2.0, 5.0});
  CHECK(bucketize(s, 2, Reduction::max) == std::vector<double>{3.0, 6.0});
  CHECK(bucketize(s, 6, Reduction::mean) == s);
  CHECK(bucketize(s, 6, Reduction::max) == s);
  // 7 bins into 3 buckets: leading bucket takes the extra bin.
  CHECK(bucketize(std::vector<double>{1, 2, 3, 4, 5, 6, 7}, 3, Reduction::mean) ==
        std::vector<double>{2.0, 4.5, 6.5});
  CHECK(error_code_of([&] { bucketize(s, 7, Reduction::mean); }) == Errc::invalid_argument);
  CHECK(error_code_of([&] { bucketize(s, 0, Reduction::mean); }) == Errc::invalid_argument);
}

TEST_CASE("bucket ranges tile the spectrum") {
  for (std::size_t len : {10u, 999u, 100000u}) {
    for (std::size_t nb : {1u, 3u, 7u, 10u}) {
      const auto r = bucket_ranges(len, nb);
      REQUIRE(r.size() == nb);
      CHECK(r.front().begin == 0);
      CHECK(r.back().end == len);
      std::size_t lo = len, hi = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (b) CHECK(r[b].begin == r[b - 1].end);
        lo = std::min(lo, r[b].end - r[b].begin);
        hi = std::max(hi, r[b].end - r[b].begin);
        if (b && r[b].end - r[b].begin > r[b - 1].end - r[b - 1].begin) FAIL("extra bins must lead");
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("max reduction dominates mean reduction") {
  Rng rng(9);
  std::vector<double> v(5003);
  for (auto& e : v) e = rng.uniform() * 10.0;
  const auto mx = bucketize(v, 97, Reduction::max);
  const auto mn = bucketize(v, 97, Reduction::mean);
  for (std::size_t i = 0; i < mx.size(); ++i) CHECK(mx[i] >= mn[i]);
}

TEST_CASE("feature chain on synthetic traces") {
  const auto d = default_profiles();
  const IQTrace low = synth_trace(d.low_end, "prog2", 0.025, 20e6, 3);
  const auto f = make_features(low, program_feature_config());
  CHECK(f.values.size() == 1000);
  CHECK(f.source_label == std::optional<std::string>("prog2"));
  for (double v : f.values) CHECK((std::isfinite(v) && v >= 0.0));
  CHECK(make_features(low, program_feature_config()).values == f.values);

  // The chain is exactly segment -> |DFT| -> trim -> buckets.
  const auto seg = segment(low, 0.0, 0.01);
  CHECK(f.values == bucketize(trim_middle_half(fft_magnitude(seg.samples)), 1000, Reduction::max));

  FeatureConfig crypto = crypto_feature_config();
  crypto.segment_s = 0.1;
  const IQTrace high = synth_trace(d.high_end, "aes256", 0.1, 20e6, 3);
  CHECK(make_features(high, crypto).values.size() == 500);

  const IQTrace shorter = synth_trace(d.low_end, "prog2", 0.005, 20e6, 3);
  CHECK(error_code_of([&] { make_features(shorter, program_feature_config()); }) == Errc::insufficient_data);
}

TEST_CASE("batch features build a sorted class table") {
  const auto p = default_profiles().low_end;
  std::vector<IQTrace> traces;
  for (const char* c : {"prog7", "prog1", "prog7", "prog3"}) traces.push_back(synth_trace(p, c, 0.001, 4e6, 1));
  FeatureConfig fc = program_feature_config();
  fc.segment_s = 0.001;
  fc.n_buckets = 100;
  const Dataset ds = batch_features(traces, fc);
  CHECK(ds.class_table == std::vector<std::string>{"prog1", "prog3", "prog7"});
  CHECK(ds.labels == std::vector<std::uint32_t>{2, 0, 2, 1});
  CHECK(ds.feature_dim == 100);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto row = ds.row(i);
    CHECK(std::vector<double>(row.begin(), row.end()) == make_features(traces[i], fc).values);
  }

  const Dataset empty = batch_features({}, fc);
  CHECK(empty.rows() == 0);
  CHECK(empty.n_classes() == 0);

  traces[2].label.reset();
  const std::string msg = testing::error_message_of([&] { batch_features(traces, fc); });
  CHECK(msg.find('2') != std::string::npos);
  CHECK(error_code_of([&] { batch_features(traces, fc); }) == Errc::missing_label);
}

TEST_CASE("200,000-sample window is featurized within 40 ms") {
  const IQTrace t = synth_trace(default_profiles().low_end, "prog0", 0.01, 20e6, 1);
  make_features(t, program_feature_config());  // plan warm-up
  std::vector<double> ms;
  for (int i = 0; i < 7; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    make_features(t, program_feature_config());
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  MESSAGE("median feature time " << ms[3] << " ms");
  CHECK(ms[3] < 40.0);
}

TEST_CASE("dataset files round-trip and reject corruption") {
  testing::TempDir dir("ft");
  Dataset ds;
  ds.feature_dim = 3;
  ds.class_table = {"a", "b"};
  ds.add_row(std::vector<double>{1.5, -2.0, 1e-300}, 0);
  ds.add_row(std::vector<double>{0.0, 3.25, 7.0}, 1);
  save_dataset(ds, dir / "d.ds");
  CHECK(load_dataset(dir / "d.ds") == ds);

  const std::string bytes = text::read_file(dir / "d.ds");
  text::write_file(dir / "t.ds", bytes.substr(0, bytes.size() - 5));
  CHECK(error_code_of([&] { load_dataset(dir / "t.ds"); }) == Errc::invalid_dataset);
  text::write_file(dir / "m.ds", "emsca-features/2\n" + bytes.substr(bytes.find('\n') + 1));
  CHECK(error_code_of([&] { load_dataset(dir / "m.ds"); }) == Errc::invalid_dataset);

  CHECK(error_code_of([&] { ds.add_row(std::vector<double>{1.0}, 0); }) == Errc::shape);
}

}  // TEST_SUITE
