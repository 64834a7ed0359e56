#pragma once

// Deterministic baseband model of a leaking processor.
//
// A capture tuned to the leaking clock (or harmonic) sees the carrier at DC.
// Software activity amplitude-modulates that carrier, so every envelope tone at
// offset f puts a side-band pair at -f and +f:
//
//   x[n] = (1 + d(t) * sum_k a_k * g_k * cos(2*pi*f_k*s*t + phi_k)) + w[n] + i[n]
//
// d(t) is the on/off activity gate (bursts and duty pattern), g_k and s are
// per-trace amplitude and clock jitter, w is complex white Gaussian noise at
// noise_floor_db relative to the unit carrier and i are Poisson-timed impulses.
//
// Random streams (all derived from the caller's seed with derive_seed):
//   stream_tag::kNoise     (seed, class)          -> w
//   stream_tag::kImpulse   (seed, class)          -> i
//   stream_tag::kActivity  (seed, class, burst b) -> g_k, s, phi_k of burst b
// so any single trace is reproducible from (profile, class, duration, rate,
// seed) alone on every platform.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emsca/signal_core.hpp"

namespace emsca {

struct EnvelopeTone {
  double offset_hz = 0.0;  // f_alt
  double amplitude = 0.0;  // modulation depth, (0, 1]
  friend bool operator==(const EnvelopeTone&, const EnvelopeTone&) = default;
};

struct DutyPattern {
  double period_s = 0.0;
  double on_fraction = 1.0;
  friend bool operator==(const DutyPattern&, const DutyPattern&) = default;
};

struct ProgramClassSpec {
  std::string class_id;
  std::vector<EnvelopeTone> tones;
  std::optional<DutyPattern> duty;

  void validate() const;
  double max_offset_hz() const noexcept;
  friend bool operator==(const ProgramClassSpec&, const ProgramClassSpec&) = default;
};

struct EmitterProfile {
  std::string name;
  double carrier_freq_hz = 0.0;
  int harmonic_index = 1;
  double noise_floor_db = -30.0;
  double impulse_rate_hz = 0.0;
  double impulse_gain_db = 0.0;
  /// Relative standard deviation of each tone amplitude, drawn per burst.
  double amplitude_jitter = 0.05;
  /// Relative standard deviation of the activity clock (scales all offsets).
  double clock_jitter = 2e-5;
  std::vector<ProgramClassSpec> classes;

  /// Frequency the capture is tuned to: carrier * harmonic.
  double emission_freq_hz() const noexcept {
    return carrier_freq_hz * static_cast<double>(harmonic_index);
  }
  const ProgramClassSpec& find_class(const std::string& class_id) const;
  std::vector<std::string> class_ids() const;
  void validate() const;

  friend bool operator==(const EmitterProfile&, const EmitterProfile&) = default;
};

namespace stream_tag {
inline constexpr std::uint64_t kNoise = 0x6e6f697365;       // "noise"
inline constexpr std::uint64_t kImpulse = 0x696d70756c7365; // "impulse"
inline constexpr std::uint64_t kActivity = 0x6163746976;    // "activ"
}  // namespace stream_tag

/// Half-open activity interval in samples.
struct ActiveInterval {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Renders a class with activity restricted to the given intervals. This is
/// the common kernel of synth_trace and synth_crypto_session.
IQTrace render_emission(const EmitterProfile& profile, const ProgramClassSpec& spec,
                        std::size_t n_samples, double sample_rate_hz,
                        std::span<const ActiveInterval> active, std::uint64_t seed);

IQTrace synth_trace(const EmitterProfile& profile, const std::string& class_id,
                    double duration_s, double sample_rate_hz, std::uint64_t seed);

/// n_bursts activity bursts of burst_s separated by gap_s of idle carrier:
/// burst, gap, burst, ..., burst.
IQTrace synth_crypto_session(const EmitterProfile& profile, const std::string& class_id,
                             int n_bursts, double gap_s, double burst_s,
                             double sample_rate_hz, std::uint64_t seed);

struct DefaultProfiles {
  EmitterProfile high_end;  // application processor, 4 crypto workloads
  EmitterProfile low_end;   // 8-bit microcontroller, 10 looping programs
};

DefaultProfiles default_profiles();

/// Resolves "high_end" / "low_end" or loads a profile file.
EmitterProfile resolve_profile(const std::string& name_or_path);

/// Twenty firmware modifications of `base`: subtasks added, removed or
/// retimed, and foreign program bodies. Class ids are "<base>-modN".
std::vector<ProgramClassSpec> tampered_variants(const EmitterProfile& profile,
                                                const std::string& base_class);

// Profile files: UTF-8 text, "key = value" lines, then one "[class <id>]"
// block per class holding "tone = <offset_hz> <amplitude>" lines and an
// optional "duty = <period_s> <on_fraction>". The first key must be
// "format = emsca-profile/1".
inline constexpr const char* kProfileFormat = "emsca-profile/1";

std::string format_profile(const EmitterProfile& profile);
EmitterProfile parse_profile(std::string_view text, const std::string& origin = "<profile>");
EmitterProfile load_profile(const std::filesystem::path& path);
void save_profile(const EmitterProfile& profile, const std::filesystem::path& path);

}  // namespace emsca
