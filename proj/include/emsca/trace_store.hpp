#pragma once

// Labeled trace corpora on disk:
//
//   <root>/manifest.tsv
//   <root>/<label>/<seq>.cf32       payload
//   <root>/<label>/<seq>.cf32.meta  sidecar
//
// manifest.tsv is UTF-8, tab separated. The first line is the version header
// "# emsca-corpus-manifest v1", the second the column names:
//   path  label  sample_rate_hz  center_freq_hz  duration_s  seed
// path is relative to the root with '/' separators; duration_s is the payload
// sample count divided by the rate, printed in shortest round-trip form; seed
// is empty for traces without one.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emsca/emitter_sim.hpp"
#include "emsca/signal_core.hpp"

namespace emsca {

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kManifestHeader = "# emsca-corpus-manifest v1";

struct ManifestEntry {
  std::string path;
  std::string label;
  double sample_rate_hz = 0.0;
  double center_freq_hz = 0.0;
  double duration_s = 0.0;
  std::optional<std::uint64_t> seed;

  std::uint64_t sample_count() const;
  std::uint64_t payload_bytes() const { return sample_count() * kBytesPerSample; }
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::uint64_t total_payload_bytes() const;
  std::vector<std::string> labels() const;  // sorted, unique
  std::filesystem::path absolute(const ManifestEntry& e) const { return root / e.path; }
};

std::string format_manifest(const CorpusManifest& manifest);
CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& root);
/// `path` is either the manifest file or the corpus root.
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& manifest);

struct CorpusSpec {
  std::size_t per_class = 0;
  double duration_s = 0.0;
  double sample_rate_hz = 0.0;
  std::uint64_t seed = 1;
  /// Empty means every class of the profile.
  std::vector<std::string> classes;
};

/// Seed of trace `index` of `class_id` in a corpus built with `seed`.
std::uint64_t corpus_trace_seed(std::uint64_t seed, const std::string& class_id, std::size_t index);

/// Synthesizes and writes the corpus (parallel per file), then the manifest.
/// Anything written is removed again if a step fails.
CorpusManifest build_corpus(const EmitterProfile& profile, const CorpusSpec& spec,
                            const std::filesystem::path& root);

/// Downsamples every entry into dest_root. target == source copies verbatim.
CorpusManifest resample_corpus(const CorpusManifest& manifest, double target_rate_hz,
                               const std::filesystem::path& dest_root);

/// Stratified per label: round(train_fraction * n) entries of each label go to
/// train, the rest to test, after a seeded shuffle. Both keep manifest order.
std::pair<CorpusManifest, CorpusManifest> split(const CorpusManifest& manifest,
                                                double train_fraction, std::uint64_t seed);

struct VerifyIssue {
  std::string path;
  std::string problem;
};

/// Checks payload size and sidecar fields of every entry.
std::vector<VerifyIssue> verify(const CorpusManifest& manifest);

/// Reads every entry (parallel), in manifest order.
std::vector<IQTrace> load_corpus(const CorpusManifest& manifest);

}  // namespace emsca
