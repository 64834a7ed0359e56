#include <doctest.h>

#include <algorithm>
#include <set>

#include "emsca/emitter_sim.hpp"
#include "emsca/spectral_features.hpp"
#include "helpers.hpp"

using namespace emsca;
using testing::error_code_of;

namespace {

EmitterProfile single_tone_profile(double noise_db, double f_alt) {
  EmitterProfile p;
  p.name = "test";
  p.carrier_freq_hz = 16e6;
  p.noise_floor_db = noise_db;
  p.classes = {{"a", {{f_alt, 0.3}}, std::nullopt}};
  return p;
}

/// Indices of the k largest values, excluding `skip`.
std::vector<std::size_t> top_bins(const std::vector<double>& mag, std::size_t k, std::size_t skip) {
  std::vector<std::size_t> idx(mag.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(skip));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

TEST_SUITE("emitter-sim") {

TEST_CASE("a single envelope tone shows up as a side-band pair around DC") {
  const double rate = 1e6, f_alt = 50e3;
  const auto p = single_tone_profile(-200.0, f_alt);
  const IQTrace t = synth_trace(p, "a", 0.01, rate, 4);
  const auto mag = fft_magnitude(t.samples);
  const std::size_t n = t.size(), dc = n / 2;
  const auto bin = static_cast<std::size_t>(f_alt * static_cast<double>(n) / rate);
  const auto top = top_bins(mag, 2, dc);
  CHECK(top[0] + 1 >= dc - bin);
  CHECK(top[0] <= dc - bin + 1);
  CHECK(top[1] + 1 >= dc + bin);
  CHECK(top[1] <= dc + bin + 1);
}

TEST_CASE("strongest tone of each default class sits at its offset") {
  const auto profiles = default_profiles();
  for (const auto* prof : {&profiles.high_end, &profiles.low_end}) {
    EmitterProfile quiet = *prof;
    quiet.noise_floor_db = -60.0;
    quiet.impulse_rate_hz = 0.0;
    for (const auto& spec : quiet.classes) {
      if (spec.duty) continue;
      CAPTURE(spec.class_id);
      auto tones = spec.tones;
      std::sort(tones.begin(), tones.end(),
                [](const EnvelopeTone& a, const EnvelopeTone& b) { return a.amplitude > b.amplitude; });
      // Equal-strength tones have no single strongest bin pair.
      if (tones.size() > 1 && tones[1].amplitude > 0.8 * tones[0].amplitude) continue;
      const EnvelopeTone strongest = tones.front();
      const double rate = 8e6;
      const IQTrace t = synth_trace(quiet, spec.class_id, 0.005, rate, 11);
      const auto mag = fft_magnitude(t.samples);
      const std::size_t n = t.size(), dc = n / 2;
      const auto bin = static_cast<std::size_t>(std::llround(strongest.offset_hz * static_cast<double>(n) / rate));
      const auto top = top_bins(mag, 2, dc);
      CHECK(std::max(top[0], dc - bin) - std::min(top[0], dc - bin) <= 1);
      CHECK(std::max(top[1], dc + bin) - std::min(top[1], dc + bin) <= 1);
    }
  }
}

TEST_CASE("synthesis is deterministic and labeled") {
  const auto p = default_profiles().low_end;
  const IQTrace a = synth_trace(p, "prog4", 0.01, 20e6, 42);
  const IQTrace b = synth_trace(p, "prog4", 0.01, 20e6, 42);
  CHECK(a == b);
  CHECK(a.size() == 200000);
  CHECK(a.label == std::optional<std::string>("prog4"));
  CHECK(a.seed == std::optional<std::uint64_t>(42));
  CHECK(a.center_freq_hz == 288e6);
  CHECK_FALSE(synth_trace(p, "prog4", 0.01, 20e6, 43) == a);
}

TEST_CASE("unknown class lists the known ones") {
  const auto p = default_profiles().low_end;
  const std::string msg = testing::error_message_of([&] { synth_trace(p, "prog10", 0.01, 20e6, 1); });
  CHECK(msg.find("prog0") != std::string::npos);
  CHECK(msg.find("prog9") != std::string::npos);
  CHECK(error_code_of([&] { synth_trace(p, "prog10", 0.01, 20e6, 1); }) == Errc::lookup);
}

TEST_CASE("crypto session shows one activity blob per burst") {
  EmitterProfile p = single_tone_profile(-30.0, 20e3);
  const double rate = 200e3, burst = 0.2, gap = 1.0;
  const IQTrace t = synth_crypto_session(p, "a", 3, gap, burst, rate, 9);
  CHECK(t.size() == static_cast<std::size_t>(std::llround((3 * burst + 2 * gap) * rate)));

  // RMS of the demodulated envelope (|x| - 1) over 1 ms blocks.
  const std::size_t block = 200;
  std::vector<double> rms;
  for (std::size_t b = 0; b + block <= t.size(); b += block) {
    double s = 0.0;
    for (std::size_t i = b; i < b + block; ++i) {
      const double d = std::abs(std::complex<double>(t.samples[i])) - 1.0;
      s += d * d;
    }
    rms.push_back(std::sqrt(s / block));
  }
  // Idle reference: the middle of the first gap.
  const std::size_t gap_mid = static_cast<std::size_t>((burst + gap / 2) * 1000);
  double idle = 0.0;
  for (std::size_t b = gap_mid - 100; b < gap_mid + 100; ++b) idle += rms[b] * rms[b];
  idle = std::sqrt(idle / 200);

  int runs = 0;
  bool inside = false;
  for (double r : rms) {
    const bool above = r > 3.0 * idle;
    if (above && !inside) ++runs;
    inside = above;
  }
  CHECK(runs == 3);
}

TEST_CASE("one burst spanning the trace equals synth_trace") {
  const auto p = default_profiles().high_end;
  const IQTrace s = synth_crypto_session(p, "aes128", 1, 1.0, 0.002, 20e6, 5);
  const IQTrace t = synth_trace(p, "aes128", 0.002, 20e6, 5);
  CHECK(s.samples == t.samples);
}

TEST_CASE("default profiles") {
  const auto d = default_profiles();
  CHECK(d.high_end.carrier_freq_hz == 1.4e9);
  CHECK(d.high_end.harmonic_index == 1);
  CHECK(d.high_end.class_ids() == std::vector<std::string>{"other", "aes256", "aes128", "3des"});
  CHECK(d.low_end.emission_freq_hz() == 288e6);
  CHECK(d.low_end.harmonic_index == 18);
  REQUIRE(d.low_end.classes.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(d.low_end.classes[i].class_id == "prog" + std::to_string(i));
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = i + 1; j < 10; ++j) CHECK_FALSE(d.low_end.classes[i].tones == d.low_end.classes[j].tones);
  }

  // Classes whose difference from another class lies entirely above 0.5 MHz.
  auto tone_set = [](const ProgramClassSpec& c) {
    std::set<std::pair<double, double>> s;
    for (const auto& t : c.tones) s.insert({t.offset_hz, t.amplitude});
    return s;
  };
  std::set<std::string> wide_only;
  for (const auto& a : d.low_end.classes) {
    for (const auto& b : d.low_end.classes) {
      if (a.class_id == b.class_id) continue;
      const auto sa = tone_set(a), sb = tone_set(b);
      bool all_high = true;
      for (const auto& t : sa) all_high = all_high && (sb.count(t) || t.first > 0.5e6);
      for (const auto& t : sb) all_high = all_high && (sa.count(t) || t.first > 0.5e6);
      if (all_high) wide_only.insert(a.class_id);
    }
  }
  CHECK(wide_only.size() >= 3);
}

TEST_CASE("doubling the noise amplitude doubles the out-of-tone floor") {
  EmitterProfile p = single_tone_profile(-40.0, 50e3);
  EmitterProfile q = p;
  q.noise_floor_db = -40.0 + 20.0 * std::log10(2.0);
  const double rate = 1e6;
  auto floor_rms = [&](const EmitterProfile& prof) {
    const auto mag = fft_magnitude(synth_trace(prof, "a", 0.02, rate, 8).samples);
    // Bins beyond +-200 kHz hold noise only.
    const std::size_t n = mag.size(), edge = n / 5;
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i + edge < n / 2 || i > n / 2 + edge) {
        s += mag[i] * mag[i];
        ++cnt;
      }
    }
    return std::sqrt(s / static_cast<double>(cnt));
  };
  CHECK(floor_rms(q) / floor_rms(p) == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("tone outside the band is rejected") {
  const auto p = default_profiles().high_end;
  CHECK(error_code_of([&] { synth_trace(p, "3des", 0.001, 4e6, 1); }) == Errc::invalid_argument);
}

TEST_CASE("profile files round-trip") {
  const auto p = default_profiles().low_end;
  CHECK(parse_profile(format_profile(p)) == p);
  testing::TempDir dir("em");
  save_profile(default_profiles().high_end, dir / "h.profile");
  CHECK(load_profile(dir / "h.profile") == default_profiles().high_end);
  CHECK(resolve_profile((dir / "h.profile").string()) == default_profiles().high_end);
  CHECK_THROWS_AS(parse_profile("format = emsca-profile/9\n"), Error);
  CHECK_THROWS_AS(parse_profile("name = x\n"), Error);
}

TEST_CASE("twenty distinct firmware modifications") {
  const auto p = default_profiles().low_end;
  const auto v = tampered_variants(p, "prog0");
  REQUIRE(v.size() == 20);
  std::set<std::string> ids;
  for (const auto& s : v) {
    ids.insert(s.class_id);
    CHECK(s.class_id.rfind("prog0-mod", 0) == 0);
    CHECK_FALSE(s.tones == p.find_class("prog0").tones);
    CHECK_NOTHROW(s.validate());
  }
  CHECK(ids.size() == 20);
}

}  // TEST_SUITE
