#pragma once

// End-to-end experiments behind the exp-* verbs. Each one synthesizes its
// corpus in memory (trace i of class c always uses corpus_trace_seed(seed, c,
// i), so the traces match what `emsca corpus` would write), keeps only the
// feature rows, and returns a human report plus the CSV files it produced.
// Nothing time-dependent goes into the CSVs.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emsca/emitter_sim.hpp"
#include "emsca/spectral_features.hpp"

namespace emsca::exp {

struct Outcome {
  std::string report;
  /// file name -> contents, written into the output directory.
  std::map<std::string, std::string> files;
  bool passed = false;
};

struct CryptoOptions {
  std::uint64_t seed = 1;
  std::string profile = "high_end";
  std::size_t per_class = 600;
  std::size_t folds = 10;
  double sample_rate_hz = 20e6;
  double duration_s = 0.01;
  std::vector<std::size_t> hidden{10, 5};
  double min_accuracy = 0.95;
};

struct ProgramsOptions {
  std::uint64_t seed = 1;
  std::string profile = "low_end";
  std::size_t per_class = 600;
  std::size_t folds = 10;
  double sample_rate_hz = 20e6;
  double duration_s = 0.01;
  std::vector<std::size_t> hidden{10, 3};
  double min_accuracy = 0.90;
};

struct DownsampleOptions {
  std::uint64_t seed = 1;
  std::string profile = "low_end";
  std::vector<std::string> classes{"prog0", "prog1", "prog2", "prog3"};
  std::size_t per_class = 600;
  std::size_t folds = 10;
  double source_rate_hz = 20e6;
  std::vector<double> rates_hz{16e6, 12e6, 8e6, 4e6, 3e6, 2e6, 1e6, 0.5e6};
  double duration_s = 0.01;
  std::vector<std::size_t> hidden{10, 5};
  /// |acc(reference) - acc(source)| must not exceed this.
  double max_gap = 0.02;
  double reference_rate_hz = 4e6;
  /// acc(low) must sit at least this far below acc(reference).
  double min_drop = 0.10;
  double low_rate_hz = 0.5e6;
  /// Reference payload must be rate ratio +- this fraction of the source payload.
  double storage_tolerance = 0.001;
};

struct TamperOptions {
  std::uint64_t seed = 1;
  std::string profile = "low_end";
  std::string base_class = "prog0";
  std::size_t train = 500;
  std::size_t holdout = 100;
  std::size_t traces_per_variant = 5;
  double sample_rate_hz = 4e6;
  double duration_s = 0.01;
  std::size_t n_buckets = 200;
  Reduction reduction = Reduction::mean;
  double nu = 0.1;
  double gamma_factor = 0.1;
  double max_legit_error = 0.25;
  /// A modified program counts as detected when more than half its traces
  /// are novel.
  std::size_t required_detections = 20;
};

Outcome run_crypto(const CryptoOptions& options);
Outcome run_programs(const ProgramsOptions& options);
Outcome run_downsample(const DownsampleOptions& options);
Outcome run_tamper(const TamperOptions& options);

/// Display names for the crypto classes: other -> Other, aes256 -> AES-256, ...
std::string crypto_display_name(const std::string& class_id);
/// "prog7" -> "7"; anything else unchanged.
std::string program_label(const std::string& class_id);

}  // namespace emsca::exp
