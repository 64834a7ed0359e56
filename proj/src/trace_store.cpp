#include "emsca/trace_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>

#include "emsca/error.hpp"
#include "emsca/parallel.hpp"
#include "emsca/rng.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kCorpusTag = 0x636f72707573;  // "corpus"
constexpr std::uint64_t kSplitTag = 0x73706c6974;     // "split"

void check_label(const std::string& label) {
  if (label.empty() || label == "." || label == ".." ||
      label.find_first_of("/\\\t\n\r") != std::string::npos) {
    fail(Errc::invalid_argument, "label '" + label + "' cannot be used as a corpus directory name");
  }
}

std::string seq_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.cf32", i);
  return buf;
}

ManifestEntry entry_for(const IQTrace& t, std::string rel) {
  ManifestEntry e;
  e.path = std::move(rel);
  e.label = t.label.value_or("");
  e.sample_rate_hz = t.sample_rate_hz;
  e.center_freq_hz = t.center_freq_hz;
  e.duration_s = t.duration_s();
  e.seed = t.seed;
  return e;
}

// Removes what a failed build or resample wrote under `root`.
class Cleanup {
 public:
  explicit Cleanup(fs::path root) : root_(std::move(root)), existed_(fs::exists(root_)) {}
  void track(const fs::path& p) {
    std::lock_guard lock(mutex_);
    written_.push_back(p);
  }
  void commit() noexcept { committed_ = true; }
  ~Cleanup() {
    if (committed_) return;
    std::error_code ec;
    if (!existed_) {
      fs::remove_all(root_, ec);
      return;
    }
    for (const auto& p : written_) {
      fs::remove(p, ec);
      fs::remove(sidecar_path(p), ec);
    }
    fs::remove(root_ / kManifestName, ec);
  }

 private:
  fs::path root_;
  bool existed_;
  bool committed_ = false;
  std::mutex mutex_;
  std::vector<fs::path> written_;
};

}  // namespace

std::uint64_t ManifestEntry::sample_count() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * sample_rate_hz));
}

std::uint64_t CorpusManifest::total_payload_bytes() const {
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.payload_bytes();
  return total;
}

std::vector<std::string> CorpusManifest::labels() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.label);
  return {s.begin(), s.end()};
}

std::string format_manifest(const CorpusManifest& manifest) {
  std::ostringstream os;
  os << kManifestHeader << '\n'
     << "path\tlabel\tsample_rate_hz\tcenter_freq_hz\tduration_s\tseed\n";
  for (const auto& e : manifest.entries) {
    os << e.path << '\t' << e.label << '\t' << text::format_double(e.sample_rate_hz) << '\t'
       << text::format_double(e.center_freq_hz) << '\t' << text::format_double(e.duration_s) << '\t'
       << (e.seed ? std::to_string(*e.seed) : "") << '\n';
  }
  return os.str();
}

CorpusManifest parse_manifest(std::string_view body, const fs::path& root) {
  CorpusManifest m;
  m.root = root;
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (line_no == 1) {
      if (line != kManifestHeader) fail(Errc::manifest, where + ": missing '" + kManifestHeader + "' header");
      continue;
    }
    if (line_no == 2 && line.substr(0, 5) == "path\t") continue;
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 6) fail(Errc::manifest, where + ": expected 6 columns, got " + std::to_string(cols.size()));
    ManifestEntry e;
    e.path = std::string(cols[0]);
    e.label = std::string(cols[1]);
    const auto rate = text::parse_double(cols[2]);
    const auto center = text::parse_double(cols[3]);
    const auto dur = text::parse_double(cols[4]);
    if (e.path.empty() || e.label.empty()) fail(Errc::manifest, where + ": empty path or label");
    if (!rate || !(*rate > 0.0)) fail(Errc::manifest, where + ": bad sample_rate_hz");
    if (!center) fail(Errc::manifest, where + ": bad center_freq_hz");
    if (!dur || *dur < 0.0) fail(Errc::manifest, where + ": bad duration_s");
    e.sample_rate_hz = *rate;
    e.center_freq_hz = *center;
    e.duration_s = *dur;
    if (!cols[5].empty()) {
      const auto seed = text::parse_u64(cols[5]);
      if (!seed) fail(Errc::manifest, where + ": bad seed");
      e.seed = *seed;
    }
    m.entries.push_back(std::move(e));
  }
  if (line_no == 0) fail(Errc::manifest, "empty manifest");
  return m;
}

CorpusManifest load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestName : path;
  return parse_manifest(text::read_file(file), file.parent_path());
}

void save_manifest(const CorpusManifest& manifest) {
  text::write_file(manifest.root / kManifestName, format_manifest(manifest));
}

std::uint64_t corpus_trace_seed(std::uint64_t seed, const std::string& class_id, std::size_t index) {
  return derive_seed(seed, kCorpusTag, fnv1a(class_id), index);
}

CorpusManifest build_corpus(const EmitterProfile& profile, const CorpusSpec& spec, const fs::path& root) {
  if (spec.per_class == 0) fail(Errc::invalid_argument, "per_class must be >= 1");
  if (!(spec.duration_s > 0.0)) fail(Errc::invalid_argument, "duration must be positive");
  if (!(spec.sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "sample rate must be positive");
  const auto classes = spec.classes.empty() ? profile.class_ids() : spec.classes;
  for (const auto& c : classes) {
    profile.find_class(c);
    check_label(c);
  }

  Cleanup cleanup(root);
  CorpusManifest m;
  m.root = root;
  m.entries.resize(classes.size() * spec.per_class);
  try {
    fs::create_directories(root);
    for (const auto& c : classes) fs::create_directories(root / c);
    parallel_for(m.entries.size(), [&](std::size_t k) {
      const auto& cls = classes[k / spec.per_class];
      const std::size_t i = k % spec.per_class;
      IQTrace t = synth_trace(profile, cls, spec.duration_s, spec.sample_rate_hz,
                              corpus_trace_seed(spec.seed, cls, i));
      const std::string rel = cls + "/" + seq_name(i);
      cleanup.track(root / rel);
      write_trace(t, root / rel);
      m.entries[k] = entry_for(t, rel);
    });
    save_manifest(m);
  } catch (const fs::filesystem_error& e) {
    fail(Errc::io, e.what());
  }
  cleanup.commit();
  return m;
}

CorpusManifest resample_corpus(const CorpusManifest& manifest, double target_rate_hz,
                               const fs::path& dest_root) {
  if (!(target_rate_hz > 0.0)) fail(Errc::invalid_argument, "target rate must be positive");
  for (const auto& e : manifest.entries) {
    if (target_rate_hz > e.sample_rate_hz) {
      fail(Errc::invalid_argument, e.path + ": target rate " + text::format_double(target_rate_hz) +
                                       " Hz exceeds source rate " + text::format_double(e.sample_rate_hz) + " Hz");
    }
  }
  if (fs::exists(dest_root) && fs::exists(manifest.root) && fs::equivalent(dest_root, manifest.root)) {
    fail(Errc::invalid_argument, "destination must differ from the source corpus");
  }
  Cleanup cleanup(dest_root);
  CorpusManifest out;
  out.root = dest_root;
  out.entries.resize(manifest.entries.size());
  try {
    fs::create_directories(dest_root);
    for (const auto& e : manifest.entries) fs::create_directories((dest_root / e.path).parent_path());
    parallel_for(manifest.entries.size(), [&](std::size_t k) {
      const auto& e = manifest.entries[k];
      const fs::path src = manifest.absolute(e);
      const fs::path dst = dest_root / e.path;
      cleanup.track(dst);
      if (target_rate_hz == e.sample_rate_hz) {
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        fs::copy_file(sidecar_path(src), sidecar_path(dst), fs::copy_options::overwrite_existing);
        out.entries[k] = e;
        return;
      }
      const IQTrace t = downsample(read_trace(src), target_rate_hz);
      write_trace(t, dst);
      out.entries[k] = entry_for(t, e.path);
      out.entries[k].label = e.label;
    });
    save_manifest(out);
  } catch (const fs::filesystem_error& e) {
    fail(Errc::io, e.what());
  }
  cleanup.commit();
  return out;
}

std::pair<CorpusManifest, CorpusManifest> split(const CorpusManifest& manifest, double train_fraction,
                                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(Errc::invalid_argument, "train fraction must lie in (0, 1)");
  }
  std::vector<bool> to_train(manifest.entries.size(), false);
  for (const auto& label : manifest.labels()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      if (manifest.entries[i].label == label) idx.push_back(i);
    }
    if (idx.size() < 2) {
      fail(Errc::insufficient_samples, "label " + label + " has " + std::to_string(idx.size()) +
                                           " entries, a split needs at least 2");
    }
    Rng rng(derive_seed(seed, kSplitTag, fnv1a(label)));
    rng.shuffle(std::span(idx));
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t j = 0; j < n_train; ++j) to_train[idx[j]] = true;
  }
  CorpusManifest train{manifest.root, {}};
  CorpusManifest test{manifest.root, {}};
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    (to_train[i] ? train : test).entries.push_back(manifest.entries[i]);
  }
  return {std::move(train), std::move(test)};
}

std::vector<VerifyIssue> verify(const CorpusManifest& manifest) {
  std::vector<std::vector<VerifyIssue>> per(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t k) {
    const auto& e = manifest.entries[k];
    const fs::path p = manifest.absolute(e);
    auto issue = [&](std::string what) { per[k].push_back({e.path, std::move(what)}); };
    std::error_code ec;
    const auto size = fs::file_size(p, ec);
    if (ec) {
      issue("payload missing");
      return;
    }
    if (size != e.payload_bytes()) {
      issue("payload is " + std::to_string(size) + " bytes, manifest implies " + std::to_string(e.payload_bytes()));
    }
    if (!fs::exists(sidecar_path(p))) {
      issue("sidecar missing");
      return;
    }
    try {
      const IQTrace t = read_trace(p);
      if (t.sample_rate_hz != e.sample_rate_hz) issue("sidecar sample_rate_hz differs");
      if (t.center_freq_hz != e.center_freq_hz) issue("sidecar center_freq_hz differs");
      if (t.label.value_or("") != e.label) issue("sidecar label differs");
      if (t.seed != e.seed) issue("sidecar seed differs");
    } catch (const Error& err) {
      issue(err.what());
    }
  });
  std::vector<VerifyIssue> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<IQTrace> load_corpus(const CorpusManifest& manifest) {
  std::vector<IQTrace> out(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t k) {
    out[k] = read_trace(manifest.absolute(manifest.entries[k]));
    if (!out[k].label) out[k].label = manifest.entries[k].label;
  });
  return out;
}

}  // namespace emsca
