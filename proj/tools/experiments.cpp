#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emsca/error.hpp"
#include "emsca/mlp.hpp"
#include "emsca/novelty.hpp"
#include "emsca/parallel.hpp"
#include "emsca/report.hpp"
#include "emsca/signal_core.hpp"
#include "emsca/text.hpp"
#include "emsca/trace_store.hpp"

namespace emsca::exp {

namespace {

using text::format_fixed;

std::string mhz(double hz) { return text::format_double(hz / 1e6); }

std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

void require_positive(std::size_t v, const char* what) {
  if (v == 0) fail(Errc::invalid_argument, std::string(what) + " must be at least 1");
}

/// Feature rows for per_class traces of every class, grouped by class.
Dataset synth_features(const EmitterProfile& profile, const std::vector<std::string>& classes,
                       std::size_t per_class, double duration_s, double rate_hz,
                       const FeatureConfig& features, std::uint64_t seed) {
  require_positive(per_class, "per-class count");
  for (const auto& c : classes) profile.find_class(c);
  std::vector<FeatureVector> rows(classes.size() * per_class);
  parallel_for(rows.size(), [&](std::size_t n) {
    const std::string& c = classes[n / per_class];
    const std::size_t i = n % per_class;
    rows[n] = make_features(
        synth_trace(profile, c, duration_s, rate_hz, corpus_trace_seed(seed, c, i)), features);
  });
  return assemble_dataset(rows);
}

MlpConfig mlp_config(const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  MlpConfig cfg;
  cfg.hidden_layers = hidden;
  cfg.seed = seed;
  return cfg;
}

std::string cv_line(const CrossValReport& cv) {
  return std::to_string(cv.k) + "-fold accuracy " + format_fixed(cv.mean_accuracy, 4) + " +- " +
         format_fixed(cv.ci95_halfwidth, 4) + " (95% CI), macro F1 " +
         format_fixed(cv.mean_macro_f1, 4);
}

std::string summary_csv(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : kv) out += k + ',' + v + '\n';
  return out;
}

}  // namespace

std::string crypto_display_name(const std::string& class_id) {
  if (class_id == "other") return "Other";
  if (class_id == "aes256") return "AES-256";
  if (class_id == "aes128") return "AES-128";
  if (class_id == "3des") return "3DES";
  return class_id;
}

std::string program_label(const std::string& class_id) {
  if (class_id.size() > 4 && class_id.compare(0, 4, "prog") == 0) return class_id.substr(4);
  return class_id;
}

Outcome run_crypto(const CryptoOptions& o) {
  const EmitterProfile profile = resolve_profile(o.profile);
  const FeatureConfig features = crypto_feature_config();
  const Dataset data = synth_features(profile, profile.class_ids(), o.per_class, o.duration_s,
                                      o.sample_rate_hz, features, o.seed);
  const CrossValReport cv = cross_validate(data, mlp_config(o.hidden, o.seed), o.folds);

  RowOrder order;
  for (const char* id : {"other", "aes256", "aes128", "3des"}) {
    if (std::find(data.class_table.begin(), data.class_table.end(), id) != data.class_table.end()) {
      order.emplace_back(id, crypto_display_name(id));
    }
  }
  for (const auto& c : data.class_table) {
    if (std::none_of(order.begin(), order.end(), [&](const auto& p) { return p.first == c; })) {
      order.emplace_back(c, c);
    }
  }

  Outcome out;
  out.passed = cv.mean_accuracy >= o.min_accuracy;
  std::ostringstream r;
  r << "cryptographic workload classification (" << o.profile << ", " << data.n_classes()
    << " classes x " << o.per_class << " traces, " << mhz(o.sample_rate_hz) << " MHz, "
    << features.n_buckets << " mean-buckets)\n\n"
    << format_classification_table(cv.pooled, order) << '\n'
    << cv_line(cv) << '\n'
    << "check mean accuracy >= " << format_fixed(o.min_accuracy, 2) << ": "
    << verdict(out.passed) << '\n';
  out.report = r.str();
  out.files["classification.csv"] = classification_csv(cv.pooled, order);
  out.files["confusion.csv"] = confusion_csv(cv.pooled);
  out.files["crossval.csv"] = crossval_csv(cv);
  out.files["summary.csv"] = summary_csv({{"seed", std::to_string(o.seed)},
                                          {"mean_accuracy", format_fixed(cv.mean_accuracy, 6)},
                                          {"ci95", format_fixed(cv.ci95_halfwidth, 6)},
                                          {"passed", out.passed ? "1" : "0"}});
  return out;
}

Outcome run_programs(const ProgramsOptions& o) {
  const EmitterProfile profile = resolve_profile(o.profile);
  const FeatureConfig features = program_feature_config();
  const Dataset data = synth_features(profile, profile.class_ids(), o.per_class, o.duration_s,
                                      o.sample_rate_hz, features, o.seed);
  const CrossValReport cv = cross_validate(data, mlp_config(o.hidden, o.seed), o.folds);

  std::vector<std::string> labels;
  for (const auto& c : data.class_table) labels.push_back(program_label(c));

  Outcome out;
  out.passed = cv.mean_accuracy >= o.min_accuracy;
  std::ostringstream r;
  r << "looping program detection (" << o.profile << ", " << data.n_classes() << " classes x "
    << o.per_class << " traces, " << mhz(o.sample_rate_hz) << " MHz, " << features.n_buckets
    << " max-buckets)\n\n"
    << format_confusion(cv.pooled, labels) << '\n'
    << format_classification_table(cv.pooled, {}, "Program") << '\n'
    << cv_line(cv) << '\n'
    << "check mean accuracy >= " << format_fixed(o.min_accuracy, 2) << ": "
    << verdict(out.passed) << '\n';
  out.report = r.str();
  out.files["classification.csv"] = classification_csv(cv.pooled);
  out.files["confusion.csv"] = confusion_csv(cv.pooled, labels);
  out.files["crossval.csv"] = crossval_csv(cv);
  out.files["summary.csv"] = summary_csv({{"seed", std::to_string(o.seed)},
                                          {"mean_accuracy", format_fixed(cv.mean_accuracy, 6)},
                                          {"ci95", format_fixed(cv.ci95_halfwidth, 6)},
                                          {"passed", out.passed ? "1" : "0"}});
  return out;
}

Outcome run_downsample(const DownsampleOptions& o) {
  require_positive(o.per_class, "per-class count");
  const EmitterProfile profile = resolve_profile(o.profile);
  for (const auto& c : o.classes) profile.find_class(c);
  const FeatureConfig features = program_feature_config();

  std::vector<double> rates{o.source_rate_hz};
  for (double r : o.rates_hz) {
    if (r != o.source_rate_hz) rates.push_back(r);
  }
  for (double r : rates) resample_ratio(o.source_rate_hz, r);

  // One trace at a time: synthesize at the source rate, derive every lower
  // rate from it, keep only the feature rows and the payload sizes.
  const std::size_t n = o.classes.size() * o.per_class;
  std::vector<std::vector<FeatureVector>> rows(rates.size(), std::vector<FeatureVector>(n));
  std::vector<std::vector<std::uint64_t>> payload(rates.size(), std::vector<std::uint64_t>(n));
  parallel_for(n, [&](std::size_t k) {
    const std::string& c = o.classes[k / o.per_class];
    const IQTrace source = synth_trace(profile, c, o.duration_s, o.source_rate_hz,
                                       corpus_trace_seed(o.seed, c, k % o.per_class));
    for (std::size_t r = 0; r < rates.size(); ++r) {
      if (r == 0) {
        rows[r][k] = make_features(source, features);
        payload[r][k] = source.payload_bytes();
      } else {
        const IQTrace low = downsample(source, rates[r]);
        rows[r][k] = make_features(low, features);
        payload[r][k] = low.payload_bytes();
      }
    }
  });

  struct RateResult {
    double rate = 0.0;
    CrossValReport cv;
    std::uint64_t bytes = 0;
  };
  std::vector<RateResult> results;
  for (std::size_t r = 0; r < rates.size(); ++r) {
    RateResult rr;
    rr.rate = rates[r];
    rr.cv = cross_validate(assemble_dataset(rows[r]), mlp_config(o.hidden, o.seed), o.folds);
    for (auto b : payload[r]) rr.bytes += b;
    results.push_back(std::move(rr));
    rows[r].clear();
    rows[r].shrink_to_fit();
  }

  auto find = [&](double rate) -> const RateResult* {
    for (const auto& rr : results) {
      if (rr.rate == rate) return &rr;
    }
    return nullptr;
  };
  const RateResult& src = results.front();
  const RateResult* ref = find(o.reference_rate_hz);
  const RateResult* low = find(o.low_rate_hz);
  if (!ref || !low) {
    fail(Errc::invalid_argument, "the rate list must include the reference (" +
                                     mhz(o.reference_rate_hz) + " MHz) and low (" +
                                     mhz(o.low_rate_hz) + " MHz) rates");
  }

  const double gap = std::abs(ref->cv.mean_accuracy - src.cv.mean_accuracy);
  const bool gap_ok = gap <= o.max_gap;
  const double drop = ref->cv.mean_accuracy - low->cv.mean_accuracy;
  const bool drop_ok = drop >= o.min_drop;
  const double fraction = static_cast<double>(ref->bytes) / static_cast<double>(src.bytes);
  const double expected = o.reference_rate_hz / o.source_rate_hz;
  const bool storage_ok = std::abs(fraction - expected) <= o.storage_tolerance;

  Outcome out;
  out.passed = gap_ok && drop_ok && storage_ok;

  std::ostringstream table;
  table << "rate_MHz  accuracy  ci95    payload_bytes  payload_pct\n";
  std::ostringstream csv;
  csv << "rate_hz,accuracy,ci95,macro_f1,payload_bytes,payload_fraction\n";
  for (const auto& rr : results) {
    const double frac = static_cast<double>(rr.bytes) / static_cast<double>(src.bytes);
    std::string rate = mhz(rr.rate);
    rate.resize(std::max<std::size_t>(rate.size(), 8), ' ');
    std::string bytes = std::to_string(rr.bytes);
    bytes.insert(0, bytes.size() < 13 ? 13 - bytes.size() : 0, ' ');
    table << rate << "  " << format_fixed(rr.cv.mean_accuracy, 4) << "    "
          << format_fixed(rr.cv.ci95_halfwidth, 4) << "  " << bytes << "  "
          << format_fixed(100.0 * frac, 2) << "%\n";
    csv << text::format_double(rr.rate) << ',' << format_fixed(rr.cv.mean_accuracy, 6) << ','
        << format_fixed(rr.cv.ci95_halfwidth, 6) << ',' << format_fixed(rr.cv.mean_macro_f1, 6)
        << ',' << rr.bytes << ',' << format_fixed(frac, 6) << '\n';
  }

  std::ostringstream r;
  r << "accuracy against sample rate (" << o.profile << ", " << o.classes.size() << " classes x "
    << o.per_class << " traces, " << features.n_buckets << " max-buckets, " << o.folds
    << "-fold CV)\n\n"
    << table.str() << '\n'
    << "check |acc(" << mhz(o.reference_rate_hz) << " MHz) - acc(" << mhz(o.source_rate_hz)
    << " MHz)| = " << format_fixed(gap, 4) << " <= " << format_fixed(o.max_gap, 2) << ": "
    << verdict(gap_ok) << '\n'
    << "check acc(" << mhz(o.reference_rate_hz) << " MHz) - acc(" << mhz(o.low_rate_hz)
    << " MHz) = " << format_fixed(drop, 4) << " >= " << format_fixed(o.min_drop, 2) << ": "
    << verdict(drop_ok) << '\n'
    << "check " << mhz(o.reference_rate_hz) << " MHz payload = " << format_fixed(100.0 * fraction, 3)
    << "% of " << mhz(o.source_rate_hz) << " MHz (expected " << format_fixed(100.0 * expected, 1)
    << "% +- " << format_fixed(100.0 * o.storage_tolerance, 1) << "%): " << verdict(storage_ok)
    << '\n';
  out.report = r.str();
  out.files["downsample.csv"] = csv.str();
  out.files["summary.csv"] = summary_csv({{"seed", std::to_string(o.seed)},
                                          {"accuracy_gap", format_fixed(gap, 6)},
                                          {"accuracy_drop", format_fixed(drop, 6)},
                                          {"payload_fraction", format_fixed(fraction, 6)},
                                          {"passed", out.passed ? "1" : "0"}});
  return out;
}

Outcome run_tamper(const TamperOptions& o) {
  require_positive(o.train, "training count");
  require_positive(o.holdout, "hold-out count");
  require_positive(o.traces_per_variant, "traces per variant");
  const EmitterProfile base = resolve_profile(o.profile);
  base.find_class(o.base_class);
  FeatureConfig features = program_feature_config();
  features.n_buckets = o.n_buckets;
  features.reduction = o.reduction;
  features.validate();

  auto legit_rows = [&](std::size_t first, std::size_t count) {
    std::vector<FeatureVector> rows(count);
    parallel_for(count, [&](std::size_t i) {
      rows[i] = make_features(synth_trace(base, o.base_class, o.duration_s, o.sample_rate_hz,
                                          corpus_trace_seed(o.seed, o.base_class, first + i)),
                              features);
    });
    return assemble_dataset(rows);
  };
  // Indices [0, train) fit the model and [train, train + holdout) test it, as
  // a split of one corpus of train + holdout traces would.
  const Dataset train = legit_rows(0, o.train);
  const Dataset holdout = legit_rows(o.train, o.holdout);

  NoveltyConfig cfg;
  cfg.nu = o.nu;
  cfg.gamma_factor = o.gamma_factor;
  cfg.seed = o.seed;
  const NoveltyModel model = fit_novelty(train, cfg);

  std::size_t train_out = 0;
  for (double s : novelty_scores(model, train)) train_out += is_novel(model, s);
  std::size_t legit_flagged = 0;
  for (double s : novelty_scores(model, holdout)) legit_flagged += is_novel(model, s);
  const double legit_err = static_cast<double>(legit_flagged) / static_cast<double>(o.holdout);

  const auto variants = tampered_variants(base, o.base_class);
  EmitterProfile modified = base;
  modified.classes.insert(modified.classes.end(), variants.begin(), variants.end());
  const std::size_t m = o.traces_per_variant;
  std::vector<double> scores(variants.size() * m);
  parallel_for(scores.size(), [&](std::size_t k) {
    const std::string& id = variants[k / m].class_id;
    const IQTrace t = synth_trace(modified, id, o.duration_s, o.sample_rate_hz,
                                  corpus_trace_seed(o.seed, id, k % m));
    scores[k] = novelty_score(model, make_features(t, features).values);
  });

  std::ostringstream table;
  std::ostringstream csv;
  table << "variant        novel/traces  min_score    verdict\n";
  csv << "variant,traces,novel,min_score,max_score,detected\n";
  std::size_t detected = 0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::size_t novel = 0;
    double lo = scores[v * m], hi = scores[v * m];
    for (std::size_t j = 0; j < m; ++j) {
      const double s = scores[v * m + j];
      novel += is_novel(model, s);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const bool hit = 2 * novel > m;
    detected += hit;
    std::string id = variants[v].class_id;
    id.resize(std::max<std::size_t>(id.size(), 14), ' ');
    std::string count = std::to_string(novel) + "/" + std::to_string(m);
    count.resize(std::max<std::size_t>(count.size(), 12), ' ');
    std::string lo_text = format_fixed(lo, 6);
    lo_text.resize(std::max<std::size_t>(lo_text.size(), 11), ' ');
    table << id << ' ' << count << "  " << lo_text << "  " << (hit ? "tampered" : "missed") << '\n';
    csv << variants[v].class_id << ',' << m << ',' << novel << ',' << format_fixed(lo, 9) << ','
        << format_fixed(hi, 9) << ',' << (hit ? 1 : 0) << '\n';
  }

  const std::size_t required = std::min(o.required_detections, variants.size());
  const bool detect_ok = detected >= required;
  const bool legit_ok = legit_err <= o.max_legit_error;

  Outcome out;
  out.passed = detect_ok && legit_ok;
  const std::string summary = "legit_err=" + format_fixed(legit_err, 3) +
                              " tamper_detect=" + std::to_string(detected) + "/" +
                              std::to_string(variants.size());
  std::ostringstream r;
  r << "firmware modification detection (" << o.profile << ", one-class SVM on " << o.train << ' '
    << o.base_class << " traces, " << mhz(o.sample_rate_hz) << " MHz, " << o.n_buckets << ' '
    << to_string(o.reduction) << "-buckets, nu " << text::format_double(o.nu) << ", gamma "
    << text::format_double(model.gamma) << ")\n"
    << "support vectors " << model.n_support() << ", training outliers " << train_out << '/'
    << o.train << ", hold-out flagged " << legit_flagged << '/' << o.holdout << "\n\n"
    << table.str() << '\n'
    << summary << '\n'
    << "check legitimate hold-out error <= " << format_fixed(o.max_legit_error, 2) << ": "
    << verdict(legit_ok) << '\n'
    << "check modified programs detected >= " << required << ": " << verdict(detect_ok) << '\n';
  out.report = r.str();
  out.files["tamper.csv"] = csv.str();
  out.files["summary.csv"] =
      summary_csv({{"seed", std::to_string(o.seed)},
                   {"legit_err", format_fixed(legit_err, 6)},
                   {"training_outlier_fraction",
                    format_fixed(static_cast<double>(train_out) / static_cast<double>(o.train), 6)},
                   {"tamper_detect", std::to_string(detected) + "/" + std::to_string(variants.size())},
                   {"passed", out.passed ? "1" : "0"}});
  return out;
}

}  // namespace emsca::exp
