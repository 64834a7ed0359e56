#include "emsca/emitter_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>

#include "emsca/error.hpp"
#include "emsca/rng.hpp"
#include "emsca/text.hpp"

namespace emsca {

void ProgramClassSpec::validate() const {
  if (class_id.empty()) fail(Errc::invalid_argument, "program class with empty id");
  if (tones.empty()) fail(Errc::invalid_argument, "class " + class_id + " has no envelope tones");
  for (const auto& t : tones) {
    if (!std::isfinite(t.offset_hz) || !(t.amplitude > 0.0 && t.amplitude <= 1.0)) {
      fail(Errc::invalid_argument,
           "class " + class_id + ": tone amplitude must lie in (0, 1] and offset be finite");
    }
  }
  if (duty && !(duty->period_s > 0.0 && duty->on_fraction > 0.0 && duty->on_fraction <= 1.0)) {
    fail(Errc::invalid_argument, "class " + class_id + ": invalid duty pattern");
  }
}

double ProgramClassSpec::max_offset_hz() const noexcept {
  double m = 0.0;
  for (const auto& t : tones) m = std::max(m, std::abs(t.offset_hz));
  return m;
}

const ProgramClassSpec& EmitterProfile::find_class(const std::string& class_id) const {
  for (const auto& c : classes) {
    if (c.class_id == class_id) return c;
  }
  std::string known;
  for (const auto& c : classes) known += (known.empty() ? "" : ", ") + c.class_id;
  fail(Errc::lookup, "unknown class '" + class_id + "' in profile " + name +
                         " (known: " + known + ")");
}

std::vector<std::string> EmitterProfile::class_ids() const {
  std::vector<std::string> ids;
  for (const auto& c : classes) ids.push_back(c.class_id);
  return ids;
}

void EmitterProfile::validate() const {
  if (!(carrier_freq_hz >= 0.0)) fail(Errc::invalid_argument, "carrier frequency must be >= 0");
  if (harmonic_index < 1) fail(Errc::invalid_argument, "harmonic_index must be >= 1");
  if (!(noise_floor_db < 0.0)) fail(Errc::invalid_argument, "noise_floor_db must be < 0");
  if (!(impulse_rate_hz >= 0.0)) fail(Errc::invalid_argument, "impulse_rate_hz must be >= 0");
  if (!(amplitude_jitter >= 0.0) || !(clock_jitter >= 0.0)) {
    fail(Errc::invalid_argument, "jitter values must be >= 0");
  }
  std::set<std::string> seen;
  for (const auto& c : classes) {
    c.validate();
    if (!seen.insert(c.class_id).second) {
      fail(Errc::invalid_argument, "duplicate class id " + c.class_id);
    }
  }
}

IQTrace render_emission(const EmitterProfile& profile, const ProgramClassSpec& spec,
                        std::size_t n_samples, double sample_rate_hz,
                        std::span<const ActiveInterval> active, std::uint64_t seed) {
  spec.validate();
  if (!(sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "sample rate must be positive");
  if (spec.max_offset_hz() >= sample_rate_hz / 2.0) {
    fail(Errc::invalid_argument,
         "class " + spec.class_id + " has a tone at " + text::format_double(spec.max_offset_hz()) +
             " Hz, outside the +/-" + text::format_double(sample_rate_hz / 2.0) + " Hz band");
  }
  const std::uint64_t class_key = fnv1a(spec.class_id);
  const double two_pi = 2.0 * std::numbers::pi;

  // Carrier plus modulation, accumulated in double before narrowing.
  std::vector<double> am(n_samples, 1.0);
  for (std::size_t b = 0; b < active.size(); ++b) {
    const std::size_t begin = std::min(active[b].begin, n_samples);
    const std::size_t end = std::min(active[b].end, n_samples);
    if (begin >= end) continue;
    Rng rng(derive_seed(seed, stream_tag::kActivity, class_key, b));
    const double clock = 1.0 + profile.clock_jitter * rng.normal();
    double duty_phase_s = 0.0;
    if (spec.duty) duty_phase_s = rng.uniform() * spec.duty->period_s;
    for (const auto& tone : spec.tones) {
      const double gain = std::max(0.0, 1.0 + profile.amplitude_jitter * rng.normal());
      const double amp = tone.amplitude * gain;
      const double phi = two_pi * rng.uniform();
      const double omega = two_pi * tone.offset_hz * clock / sample_rate_hz;
      const std::complex<double> step = std::polar(1.0, omega);
      std::complex<double> z;
      for (std::size_t n = begin; n < end; ++n) {
        const std::size_t k = n - begin;
        if (k % 4096 == 0) z = std::polar(1.0, omega * static_cast<double>(k) + phi);
        am[n] += amp * z.real();
        z *= step;
      }
    }
    if (spec.duty) {
      const double on_s = spec.duty->on_fraction * spec.duty->period_s;
      for (std::size_t n = begin; n < end; ++n) {
        const double t = static_cast<double>(n - begin) / sample_rate_hz + duty_phase_s;
        if (std::fmod(t, spec.duty->period_s) >= on_s) am[n] = 1.0;
      }
    }
  }

  std::vector<std::complex<double>> x(n_samples);
  {
    const double sigma = std::sqrt(std::pow(10.0, profile.noise_floor_db / 10.0) / 2.0);
    Rng rng(derive_seed(seed, stream_tag::kNoise, class_key));
    for (std::size_t n = 0; n < n_samples; ++n) {
      const auto [a, b] = rng.normal_pair();
      x[n] = {am[n] + sigma * a, sigma * b};
    }
  }

  if (profile.impulse_rate_hz > 0.0 && n_samples > 0) {
    Rng rng(derive_seed(seed, stream_tag::kImpulse, class_key));
    const double amp = std::pow(10.0, profile.impulse_gain_db / 20.0);
    const double tau_samples = std::max(1.0, 1e-6 * sample_rate_hz);
    const auto len = static_cast<std::size_t>(std::ceil(5.0 * tau_samples));
    const double duration = static_cast<double>(n_samples) / sample_rate_hz;
    double t = rng.exponential(profile.impulse_rate_hz);
    while (t < duration) {
      const auto start = static_cast<std::size_t>(t * sample_rate_hz);
      const std::complex<double> a = std::polar(amp, two_pi * rng.uniform());
      for (std::size_t k = 0; k < len && start + k < n_samples; ++k) {
        x[start + k] += a * std::exp(-static_cast<double>(k) / tau_samples);
      }
      t += rng.exponential(profile.impulse_rate_hz);
    }
  }

  IQTrace trace;
  trace.samples.resize(n_samples);
  for (std::size_t n = 0; n < n_samples; ++n) {
    trace.samples[n] = {static_cast<float>(x[n].real()), static_cast<float>(x[n].imag())};
  }
  trace.sample_rate_hz = sample_rate_hz;
  trace.center_freq_hz = profile.emission_freq_hz();
  trace.label = spec.class_id;
  trace.seed = seed;
  return trace;
}

namespace {

std::size_t samples_for(double duration_s, double sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
}

}  // namespace

IQTrace synth_trace(const EmitterProfile& profile, const std::string& class_id,
                    double duration_s, double sample_rate_hz, std::uint64_t seed) {
  const ProgramClassSpec& spec = profile.find_class(class_id);
  if (!(duration_s > 0.0)) fail(Errc::invalid_argument, "duration must be positive");
  if (!(sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "sample rate must be positive");
  const std::size_t n = samples_for(duration_s, sample_rate_hz);
  const ActiveInterval all{0, n};
  return render_emission(profile, spec, n, sample_rate_hz, std::span(&all, 1), seed);
}

IQTrace synth_crypto_session(const EmitterProfile& profile, const std::string& class_id,
                             int n_bursts, double gap_s, double burst_s,
                             double sample_rate_hz, std::uint64_t seed) {
  const ProgramClassSpec& spec = profile.find_class(class_id);
  if (n_bursts < 1) fail(Errc::invalid_argument, "n_bursts must be >= 1");
  if (!(burst_s > 0.0) || !(gap_s >= 0.0)) {
    fail(Errc::invalid_argument, "burst must be positive and gap non-negative");
  }
  if (!(sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "sample rate must be positive");
  const std::size_t burst_n = samples_for(burst_s, sample_rate_hz);
  const std::size_t gap_n = samples_for(gap_s, sample_rate_hz);
  std::vector<ActiveInterval> bursts;
  std::size_t pos = 0;
  for (int b = 0; b < n_bursts; ++b) {
    if (b > 0) pos += gap_n;
    bursts.push_back({pos, pos + burst_n});
    pos += burst_n;
  }
  return render_emission(profile, spec, pos, sample_rate_hz, bursts, seed);
}

DefaultProfiles default_profiles() {
  DefaultProfiles p;

  auto& hi = p.high_end;
  hi.name = "high_end";
  hi.carrier_freq_hz = 1.4e9;
  hi.harmonic_index = 1;
  hi.noise_floor_db = -30.0;
  hi.impulse_rate_hz = 20.0;
  hi.impulse_gain_db = 10.0;
  hi.classes = {
      {"other", {{310e3, 0.25}, {1.12e6, 0.15}}, DutyPattern{2e-3, 0.5}},
      {"aes256", {{620e3, 0.30}, {1.87e6, 0.20}, {2.48e6, 0.10}}, std::nullopt},
      {"aes128", {{620e3, 0.30}, {1.87e6, 0.20}}, std::nullopt},
      {"3des", {{940e3, 0.25}, {2.81e6, 0.15}}, std::nullopt},
  };

  // prog0..prog3 share their narrow-band loop content and differ only above
  // 0.5 MHz, so they collapse into one class once the retained band is that
  // narrow. Everything stays inside +/-1 MHz so 4 MHz captures keep it all.
  auto& lo = p.low_end;
  lo.name = "low_end";
  lo.carrier_freq_hz = 16e6;
  lo.harmonic_index = 18;
  lo.noise_floor_db = -30.0;
  lo.impulse_rate_hz = 2.0;
  lo.impulse_gain_db = 6.0;
  const std::vector<EnvelopeTone> loop = {{120e3, 0.40}, {240e3, 0.20}};
  auto with = [&](std::vector<EnvelopeTone> extra) {
    auto t = loop;
    t.insert(t.end(), extra.begin(), extra.end());
    return t;
  };
  lo.classes = {
      {"prog0", loop, std::nullopt},
      {"prog1", with({{550e3, 0.25}}), std::nullopt},
      {"prog2", with({{650e3, 0.25}}), std::nullopt},
      {"prog3", with({{750e3, 0.25}}), std::nullopt},
      {"prog4", {{150e3, 0.35}, {450e3, 0.20}}, std::nullopt},
      {"prog5", {{180e3, 0.35}, {360e3, 0.25}}, std::nullopt},
      {"prog6", {{90e3, 0.30}, {270e3, 0.30}, {400e3, 0.10}}, std::nullopt},
      {"prog7", {{210e3, 0.40}}, std::nullopt},
      {"prog8", {{330e3, 0.30}, {850e3, 0.20}}, std::nullopt},
      {"prog9", {{50e3, 0.30}, {500e3, 0.20}}, std::nullopt},
  };
  return p;
}

EmitterProfile resolve_profile(const std::string& name_or_path) {
  if (name_or_path == "high_end") return default_profiles().high_end;
  if (name_or_path == "low_end") return default_profiles().low_end;
  return load_profile(name_or_path);
}

std::vector<ProgramClassSpec> tampered_variants(const EmitterProfile& profile,
                                                const std::string& base_class) {
  const ProgramClassSpec& base = profile.find_class(base_class);
  std::vector<ProgramClassSpec> out;
  auto push = [&](std::vector<EnvelopeTone> tones) {
    ProgramClassSpec s;
    s.class_id = base_class + "-mod" + std::to_string(out.size());
    s.tones = std::move(tones);
    s.duty = base.duty;
    out.push_back(std::move(s));
  };
  auto near_existing = [&](double f) {
    return std::any_of(base.tones.begin(), base.tones.end(),
                       [&](const EnvelopeTone& t) { return std::abs(t.offset_hz - f) < 20e3; });
  };

  // An extra subtask in the loop: one more side-band pair.
  for (int v = 0; v < 10; ++v) {
    double f = 300e3 + 60e3 * v;
    if (near_existing(f)) f += 30e3;
    auto tones = base.tones;
    tones.push_back({f, 0.20});
    push(std::move(tones));
  }
  // A subtask removed.
  for (std::size_t k = 0; k < base.tones.size() && base.tones.size() > 1 && out.size() < 12; ++k) {
    auto tones = base.tones;
    tones.erase(tones.begin() + static_cast<std::ptrdiff_t>(k));
    push(std::move(tones));
  }
  // A different program body from the same device.
  for (const auto& other : profile.classes) {
    if (out.size() >= 16) break;
    if (other.class_id == base_class) continue;
    push(other.tones);
  }
  // Loop retimed: every side-band moves by the same factor.
  const double factors[] = {0.90, 1.10, 0.85, 1.15, 0.80, 1.20, 0.75, 1.25,
                            0.70, 1.30, 0.65, 1.35, 0.60, 1.40, 0.55, 1.45};
  for (double f : factors) {
    if (out.size() >= 20) break;
    auto tones = base.tones;
    for (auto& t : tones) t.offset_hz *= f;
    push(std::move(tones));
  }
  return out;
}

std::string format_profile(const EmitterProfile& profile) {
  using text::format_double;
  std::ostringstream os;
  os << "format = " << kProfileFormat << '\n'
     << "name = " << profile.name << '\n'
     << "carrier_freq_hz = " << format_double(profile.carrier_freq_hz) << '\n'
     << "harmonic_index = " << profile.harmonic_index << '\n'
     << "noise_floor_db = " << format_double(profile.noise_floor_db) << '\n'
     << "impulse_rate_hz = " << format_double(profile.impulse_rate_hz) << '\n'
     << "impulse_gain_db = " << format_double(profile.impulse_gain_db) << '\n'
     << "amplitude_jitter = " << format_double(profile.amplitude_jitter) << '\n'
     << "clock_jitter = " << format_double(profile.clock_jitter) << '\n';
  for (const auto& c : profile.classes) {
    os << "\n[class " << c.class_id << "]\n";
    for (const auto& t : c.tones) {
      os << "tone = " << format_double(t.offset_hz) << ' ' << format_double(t.amplitude) << '\n';
    }
    if (c.duty) {
      os << "duty = " << format_double(c.duty->period_s) << ' '
         << format_double(c.duty->on_fraction) << '\n';
    }
  }
  return os.str();
}

EmitterProfile parse_profile(std::string_view body, const std::string& origin) {
  EmitterProfile p;
  ProgramClassSpec* current = nullptr;
  bool saw_format = false;
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    auto bad = [&](const std::string& why) { fail(Errc::invalid_argument, where + ": " + why); };

    if (line.front() == '[') {
      if (line.back() != ']' || line.substr(0, 7) != "[class ") bad("expected [class <id>]");
      p.classes.push_back({});
      current = &p.classes.back();
      current->class_id = std::string(text::trim(line.substr(7, line.size() - 8)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) bad("expected key = value");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));
    auto number = [&](std::string_view v) {
      auto d = text::parse_double(v);
      if (!d) bad("bad number for " + key);
      return *d;
    };
    auto pair = [&] {
      std::vector<std::string_view> parts;
      for (auto part : text::split(value, ' ')) {
        if (!text::trim(part).empty()) parts.push_back(part);
      }
      if (parts.size() != 2) bad(key + " needs two numbers");
      return std::pair{number(parts[0]), number(parts[1])};
    };

    if (!saw_format) {
      if (key != "format") bad("first key must be 'format'");
      if (value != kProfileFormat) {
        fail(Errc::invalid_argument, where + ": unsupported profile format '" +
                                         std::string(value) + "' (expected " + kProfileFormat + ")");
      }
      saw_format = true;
      continue;
    }
    if (current) {
      if (key == "tone") {
        const auto [f, a] = pair();
        current->tones.push_back({f, a});
      } else if (key == "duty") {
        const auto [period, on] = pair();
        current->duty = DutyPattern{period, on};
      } else {
        bad("unknown class key " + key);
      }
      continue;
    }
    if (key == "name") p.name = std::string(value);
    else if (key == "carrier_freq_hz") p.carrier_freq_hz = number(value);
    else if (key == "harmonic_index") p.harmonic_index = static_cast<int>(number(value));
    else if (key == "noise_floor_db") p.noise_floor_db = number(value);
    else if (key == "impulse_rate_hz") p.impulse_rate_hz = number(value);
    else if (key == "impulse_gain_db") p.impulse_gain_db = number(value);
    else if (key == "amplitude_jitter") p.amplitude_jitter = number(value);
    else if (key == "clock_jitter") p.clock_jitter = number(value);
    else bad("unknown key " + key);
  }
  if (!saw_format) fail(Errc::invalid_argument, origin + ": missing format line");
  p.validate();
  return p;
}

EmitterProfile load_profile(const std::filesystem::path& path) {
  return parse_profile(text::read_file(path), path.string());
}

void save_profile(const EmitterProfile& profile, const std::filesystem::path& path) {
  text::write_file(path, format_profile(profile));
}

}  // namespace emsca
