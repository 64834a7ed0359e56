#pragma once

#include <unistd.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "emsca/error.hpp"
#include "emsca/rng.hpp"
#include "emsca/signal_core.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("emsca-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Textbook O(N^2) DFT magnitude in long double, rotated so index N/2 is DC.
inline std::vector<double> naive_dft_magnitude(std::span<const emsca::ComplexSample> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays exact for large products.
      const long double a = -two_pi * static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      const long double xr = x[t].real(), xi = x[t].imag();
      re += xr * std::cos(a) - xi * std::sin(a);
      im += xr * std::sin(a) + xi * std::cos(a);
    }
    out[(k + n / 2) % n] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

inline std::vector<emsca::ComplexSample> random_samples(std::size_t n, std::uint64_t seed) {
  emsca::Rng rng(seed);
  std::vector<emsca::ComplexSample> out(n);
  for (auto& s : out) {
    s = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
  }
  return out;
}

/// e^{j 2 pi f n / rate} at unit amplitude.
inline std::vector<emsca::ComplexSample> tone(std::size_t n, double freq_hz, double rate_hz) {
  std::vector<emsca::ComplexSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = 2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz;
    out[i] = {static_cast<float>(std::cos(ph)), static_cast<float>(std::sin(ph))};
  }
  return out;
}

/// Magnitude of the DFT of x at an arbitrary frequency, normalized by length
/// (a unit tone reads 1). Evaluated over the middle of the trace so filter
/// edge transients stay out.
inline double tone_amplitude(std::span<const emsca::ComplexSample> x, double freq_hz, double rate_hz) {
  const std::size_t skip = x.size() / 8;
  const std::size_t n = x.size() - 2 * skip;
  std::complex<double> acc;
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = -2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz;
    acc += std::complex<double>(x[skip + i]) * std::polar(1.0, ph);
  }
  return std::abs(acc) / static_cast<double>(n);
}

template <typename Fn>
emsca::Errc error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const emsca::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an emsca::Error");
}

template <typename Fn>
std::string error_message_of(Fn&& fn) {
  try {
    fn();
  } catch (const emsca::Error& e) {
    return e.what();
  }
  throw std::runtime_error("expected an emsca::Error");
}

}  // namespace testing
