#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "emsca/dataset.hpp"
#include "emsca/emitter_sim.hpp"
#include "emsca/error.hpp"
#include "emsca/mlp.hpp"
#include "emsca/novelty.hpp"
#include "emsca/realtime_stream.hpp"
#include "emsca/report.hpp"
#include "emsca/signal_core.hpp"
#include "emsca/spectral_features.hpp"
#include "emsca/text.hpp"
#include "emsca/trace_store.hpp"
#include "experiments.hpp"

namespace fs = std::filesystem;

namespace emsca::cli {

namespace {

using text::format_double;
using text::format_fixed;
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// "20M", "500k", "4e6" -> Hz.
double parse_rate(const std::string& s) {
  std::string_view v = text::trim(s);
  double scale = 1.0;
  if (!v.empty()) {
    const char last = v.back();
    if (last == 'M' || last == 'm') scale = 1e6;
    if (last == 'k' || last == 'K') scale = 1e3;
    if (last == 'G' || last == 'g') scale = 1e9;
    if (scale != 1.0) v.remove_suffix(1);
  }
  const auto value = text::parse_double(v);
  if (!value || !(*value > 0.0)) fail(Errc::invalid_argument, "invalid sample rate '" + s + "'");
  return *value * scale;
}

std::vector<double> parse_rates(const std::string& s) {
  std::vector<double> out;
  for (auto part : text::split(s, ',')) out.push_back(parse_rate(std::string(part)));
  if (out.empty()) fail(Errc::invalid_argument, "empty rate list");
  return out;
}

std::vector<std::size_t> parse_layers(const std::string& s) {
  std::vector<std::size_t> out;
  for (auto part : text::split(s, ',')) {
    const auto v = text::parse_u64(text::trim(part));
    if (!v || *v == 0) fail(Errc::invalid_argument, "invalid layer list '" + s + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : text::split(s, ',')) {
    if (auto t = text::trim(part); !t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_result(const std::string& path, const KeyValues& kv) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : kv) out += k + ',' + csv_escape(v) + '\n';
  text::write_file(path, out);
}

std::string size_text(std::uint64_t bytes) {
  const double b = static_cast<double>(bytes);
  if (b >= 1024.0 * 1024.0 * 1024.0) return format_fixed(b / (1024.0 * 1024.0 * 1024.0), 2) + " GiB";
  if (b >= 1024.0 * 1024.0) return format_fixed(b / (1024.0 * 1024.0), 2) + " MiB";
  if (b >= 1024.0) return format_fixed(b / 1024.0, 2) + " KiB";
  return std::to_string(bytes) + " B";
}

struct FeatureFlags {
  std::string preset = "programs";
  std::optional<std::size_t> buckets;
  std::string reduction;
  std::optional<double> segment_ms;
  bool no_trim = false;

  void add(CLI::App* app, const std::string& default_preset) {
    preset = default_preset;
    app->add_option("--preset", preset, "Feature preset: crypto (500 mean) or programs (1000 max)")
        ->capture_default_str();
    app->add_option("--buckets", buckets, "Number of spectral buckets");
    app->add_option("--reduction", reduction, "Bucket reduction: mean or max");
    app->add_option("--segment-ms", segment_ms, "Analysed segment length in ms");
    app->add_flag("--no-trim", no_trim, "Keep the full spectrum instead of the middle half");
  }

  FeatureConfig config() const {
    FeatureConfig fc;
    if (preset == "crypto") {
      fc = crypto_feature_config();
    } else if (preset == "programs") {
      fc = program_feature_config();
    } else {
      fail(Errc::invalid_argument, "unknown feature preset '" + preset + "'");
    }
    if (buckets) fc.n_buckets = *buckets;
    if (!reduction.empty()) {
      const auto r = parse_reduction(reduction);
      if (!r) fail(Errc::invalid_argument, "unknown reduction '" + reduction + "'");
      fc.reduction = *r;
    }
    if (segment_ms) fc.segment_s = *segment_ms / 1000.0;
    if (no_trim) fc.trim = Trim::none;
    fc.validate();
    return fc;
  }
};

/// Trace files, or corpus directories / manifests expanded to their entries.
std::vector<IQTrace> load_inputs(const std::vector<std::string>& inputs,
                                 const std::optional<std::string>& label) {
  std::vector<IQTrace> traces;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p) || p.filename() == kManifestName || p.extension() == ".tsv") {
      auto corpus = load_corpus(load_manifest(p));
      for (auto& t : corpus) traces.push_back(std::move(t));
    } else {
      traces.push_back(read_trace(p));
    }
  }
  if (label) {
    for (auto& t : traces) t.label = *label;
  }
  return traces;
}

MlpModel quick_model(const EmitterProfile& profile, const FeatureConfig& fc, double rate_hz,
                     std::uint64_t seed) {
  std::vector<FeatureVector> rows;
  for (const auto& c : profile.class_ids()) {
    for (std::size_t i = 0; i < 20; ++i) {
      rows.push_back(make_features(
          synth_trace(profile, c, fc.segment_s, rate_hz, corpus_trace_seed(seed, c, i)), fc));
    }
  }
  MlpConfig cfg;
  cfg.hidden_layers = {10, 3};
  cfg.seed = seed;
  return train(assemble_dataset(rows), cfg);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::lookup:
      return kExitUsage;
    default:
      return kExitError;
  }
}

struct Common {
  std::uint64_t seed = 1;
  std::string result;
};

void add_common(CLI::App* app, Common& c, const std::string& default_result) {
  c.result = default_result;
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--result", c.result, "Machine-readable result file (CSV)")->capture_default_str();
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"emsca: electromagnetic side-channel analysis toolkit"};
  app.name("emsca");
  app.require_subcommand(1);
  app.fallthrough(false);

  // synth
  Common synth_c;
  std::string synth_profile = "low_end", synth_class, synth_rate = "20M", synth_out;
  double synth_duration = 0.01;
  auto* synth = app.add_subcommand("synth", "Synthesize one emission trace");
  add_common(synth, synth_c, "emsca-synth.csv");
  synth->add_option("--profile", synth_profile, "high_end, low_end or a profile file")->capture_default_str();
  synth->add_option("--class", synth_class, "Program class id")->required();
  synth->add_option("--duration", synth_duration, "Duration in seconds")->capture_default_str();
  synth->add_option("--rate", synth_rate, "Sample rate (Hz, or with k/M suffix)")->capture_default_str();
  synth->add_option("--out", synth_out, "Output .cf32 path")->required();

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Build, split or verify a trace corpus");
  corpus->require_subcommand(1);
  Common cb_c;
  std::string cb_profile = "low_end", cb_rate = "20M", cb_out, cb_classes;
  std::size_t cb_per_class = 10;
  double cb_duration = 0.01;
  auto* cbuild = corpus->add_subcommand("build", "Synthesize a labeled corpus");
  add_common(cbuild, cb_c, "emsca-corpus.csv");
  cbuild->add_option("--profile", cb_profile, "high_end, low_end or a profile file")->capture_default_str();
  cbuild->add_option("--per-class", cb_per_class, "Traces per class")->capture_default_str();
  cbuild->add_option("--duration", cb_duration, "Trace duration in seconds")->capture_default_str();
  cbuild->add_option("--rate", cb_rate, "Sample rate")->capture_default_str();
  cbuild->add_option("--classes", cb_classes, "Comma-separated class subset");
  cbuild->add_option("--out", cb_out, "Corpus root directory")->required();

  Common cs_c;
  std::string cs_in;
  double cs_fraction = 5.0 / 6.0;
  auto* csplit = corpus->add_subcommand("split", "Stratified train/test split");
  add_common(csplit, cs_c, "emsca-split.csv");
  csplit->add_option("--in", cs_in, "Corpus root or manifest")->required();
  csplit->add_option("--train-fraction", cs_fraction, "Fraction of each label used for training")
      ->capture_default_str();

  Common cv_c;
  std::string cv_in;
  auto* cverify = corpus->add_subcommand("verify", "Check every manifest row against the files");
  add_common(cverify, cv_c, "emsca-verify.csv");
  cverify->add_option("--in", cv_in, "Corpus root or manifest")->required();

  // resample
  Common rs_c;
  std::string rs_in, rs_rate, rs_out;
  auto* resample = app.add_subcommand("resample", "Down-sample a corpus");
  add_common(resample, rs_c, "emsca-resample.csv");
  resample->add_option("--in", rs_in, "Source corpus root or manifest")->required();
  resample->add_option("--rate", rs_rate, "Target sample rate")->required();
  resample->add_option("--out", rs_out, "Destination root")->required();

  // features
  Common ft_c;
  std::vector<std::string> ft_in;
  std::optional<std::string> ft_label;
  std::string ft_out;
  FeatureFlags ft_flags;
  auto* features = app.add_subcommand("features", "Extract a feature dataset from traces");
  add_common(features, ft_c, "emsca-features.csv");
  features->add_option("--in", ft_in, "Trace files, corpus roots or manifests")->required();
  features->add_option("--label", ft_label, "Label applied to every input trace");
  features->add_option("--out", ft_out, "Dataset output path")->required();
  ft_flags.add(features, "programs");

  // train
  Common tr_c;
  std::string tr_data, tr_out, tr_hidden = "10,5";
  MlpConfig tr_cfg;
  auto* trainc = app.add_subcommand("train", "Train an MLP classifier");
  add_common(trainc, tr_c, "emsca-train.csv");
  trainc->add_option("--data", tr_data, "Feature dataset")->required();
  trainc->add_option("--hidden", tr_hidden, "Hidden layer sizes")->capture_default_str();
  trainc->add_option("--epochs", tr_cfg.epochs, "Epochs")->capture_default_str();
  trainc->add_option("--lr", tr_cfg.learning_rate, "Learning rate")->capture_default_str();
  trainc->add_option("--momentum", tr_cfg.momentum, "Momentum")->capture_default_str();
  trainc->add_option("--batch", tr_cfg.batch_size, "Mini-batch size")->capture_default_str();
  trainc->add_option("--out", tr_out, "Model output path")->required();

  // eval
  Common ev_c;
  std::string ev_model, ev_data;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
  add_common(eval, ev_c, "emsca-eval.csv");
  eval->add_option("--model", ev_model, "Model file")->required();
  eval->add_option("--data", ev_data, "Feature dataset")->required();

  // crossval
  Common xv_c;
  std::string xv_data, xv_hidden = "10,5";
  std::size_t xv_folds = 10;
  MlpConfig xv_cfg;
  auto* crossval = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
  add_common(crossval, xv_c, "emsca-crossval.csv");
  crossval->add_option("--data", xv_data, "Feature dataset")->required();
  crossval->add_option("--folds", xv_folds, "Number of folds")->capture_default_str();
  crossval->add_option("--hidden", xv_hidden, "Hidden layer sizes")->capture_default_str();
  crossval->add_option("--epochs", xv_cfg.epochs, "Epochs")->capture_default_str();
  crossval->add_option("--lr", xv_cfg.learning_rate, "Learning rate")->capture_default_str();

  // novelty
  auto* novelty = app.add_subcommand("novelty", "One-class novelty model");
  novelty->require_subcommand(1);
  Common nf_c;
  std::string nf_data, nf_out;
  NoveltyConfig nf_cfg;
  nf_cfg.gamma_factor = 0.1;
  auto* nfit = novelty->add_subcommand("fit", "Fit on legitimate feature rows");
  add_common(nfit, nf_c, "emsca-novelty-fit.csv");
  nfit->add_option("--data", nf_data, "Feature dataset of legitimate traces")->required();
  nfit->add_option("--nu", nf_cfg.nu, "Outlier fraction bound")->capture_default_str();
  nfit->add_option("--gamma", nf_cfg.gamma, "RBF gamma (default: scale rule)");
  nfit->add_option("--gamma-factor", nf_cfg.gamma_factor, "Multiplier of the scale rule")
      ->capture_default_str();
  nfit->add_option("--out", nf_out, "Model output path")->required();

  Common nd_c;
  std::string nd_model;
  std::vector<std::string> nd_in;
  FeatureFlags nd_flags;
  auto* ndetect = novelty->add_subcommand("detect", "Score traces against a novelty model");
  add_common(ndetect, nd_c, "emsca-novelty-detect.csv");
  ndetect->add_option("--model", nd_model, "Novelty model file")->required();
  ndetect->add_option("--in", nd_in, "Trace files, corpus roots or manifests")->required();
  nd_flags.add(ndetect, "programs");

  // serve
  Common sv_c;
  std::string sv_listen = "127.0.0.1:0", sv_rate = "20M", sv_trace, sv_profile = "low_end",
              sv_schedule = "prog0@0";
  std::size_t sv_repeat = 1;
  double sv_duration = 1.0, sv_chunk_ms = 2.0;
  bool sv_no_pace = false;
  auto* serve = app.add_subcommand("serve", "Stream raw cf32 samples to one TCP client");
  add_common(serve, sv_c, "emsca-serve.csv");
  serve->add_option("--listen", sv_listen, "host:port to listen on")->capture_default_str();
  serve->add_option("--rate", sv_rate, "Sample rate")->capture_default_str();
  serve->add_option("--trace", sv_trace, "Trace file to play (otherwise synthesize live)");
  serve->add_option("--repeat", sv_repeat, "Times to play the trace")->capture_default_str();
  serve->add_option("--profile", sv_profile, "Emitter profile for live synthesis")->capture_default_str();
  serve->add_option("--schedule", sv_schedule, "Class schedule, e.g. prog0@0,prog3@2.5")
      ->capture_default_str();
  serve->add_option("--duration", sv_duration, "Live synthesis duration in seconds")
      ->capture_default_str();
  serve->add_option("--chunk-ms", sv_chunk_ms, "Pacing chunk in ms")->capture_default_str();
  serve->add_flag("--no-pace", sv_no_pace, "Send as fast as possible");

  // watch
  Common wa_c;
  std::string wa_connect, wa_model, wa_rate = "20M";
  StreamConfig wa_cfg;
  double wa_window_ms = 10.0;
  FeatureFlags wa_flags;
  bool wa_quiet = false;
  auto* watch = app.add_subcommand("watch", "Classify a live stream window by window");
  add_common(watch, wa_c, "emsca-watch.csv");
  watch->add_option("--connect", wa_connect, "host:port of the stream")->required();
  watch->add_option("--model", wa_model, "Classifier model")->required();
  watch->add_option("--rate", wa_rate, "Stream sample rate")->capture_default_str();
  watch->add_option("--window-ms", wa_window_ms, "Window length in ms")->capture_default_str();
  watch->add_option("--deadline-ms", wa_cfg.deadline_ms, "Processing deadline")->capture_default_str();
  watch->add_option("--max-windows", wa_cfg.max_windows, "Stop after this many windows (0 = all)")
      ->capture_default_str();
  watch->add_option("--queue", wa_cfg.queue_capacity, "Window queue capacity")->capture_default_str();
  watch->add_flag("--quiet", wa_quiet, "Only print the summary");
  wa_flags.add(watch, "programs");

  // bench
  Common be_c;
  std::string be_rates = "20M,16M,12M,8M,4M", be_model, be_profile = "low_end", be_class = "prog3";
  BenchmarkOptions be_opts;
  double be_window_ms = 10.0, be_max_p95 = 40.0;
  FeatureFlags be_flags;
  auto* bench = app.add_subcommand("bench", "Loopback latency benchmark per sample rate");
  add_common(bench, be_c, "emsca-bench.csv");
  bench->add_option("--rates", be_rates, "Comma-separated sample rates")->capture_default_str();
  bench->add_option("--windows", be_opts.windows, "Windows per rate")->capture_default_str();
  bench->add_option("--window-ms", be_window_ms, "Window length in ms")->capture_default_str();
  bench->add_option("--deadline-ms", be_opts.deadline_ms, "Processing deadline")->capture_default_str();
  bench->add_option("--max-p95-ms", be_max_p95, "Required p95 delay bound")->capture_default_str();
  bench->add_option("--model", be_model, "Classifier model (default: a quickly trained one)");
  bench->add_option("--profile", be_profile, "Emitter profile of the streamed signal")
      ->capture_default_str();
  bench->add_option("--class", be_class, "Program class streamed")->capture_default_str();
  be_flags.add(bench, "programs");

  // experiments
  std::string exp_out;
  auto add_exp = [&](const std::string& name, const std::string& help, Common& c) {
    auto* sub = app.add_subcommand(name, help);
    c.result.clear();
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", exp_out, "Output directory (default results/" + name + ")");
    sub->add_option("--result", c.result, "Summary CSV (default <out>/summary.csv)");
    return sub;
  };
  Common xc_c, xp_c, xd_c, xt_c;
  exp::CryptoOptions xc;
  auto* exp_crypto = add_exp("exp-crypto", "Cryptographic workload classification experiment", xc_c);
  exp_crypto->add_option("--per-class", xc.per_class, "Traces per class")->capture_default_str();
  exp_crypto->add_option("--folds", xc.folds, "Cross-validation folds")->capture_default_str();
  exp_crypto->add_option("--min-accuracy", xc.min_accuracy, "Pass threshold")->capture_default_str();
  exp_crypto->add_option("--profile", xc.profile, "Emitter profile")->capture_default_str();

  exp::ProgramsOptions xp;
  auto* exp_programs = add_exp("exp-programs", "Ten-program detection experiment", xp_c);
  exp_programs->add_option("--per-class", xp.per_class, "Traces per class")->capture_default_str();
  exp_programs->add_option("--folds", xp.folds, "Cross-validation folds")->capture_default_str();
  exp_programs->add_option("--min-accuracy", xp.min_accuracy, "Pass threshold")->capture_default_str();
  exp_programs->add_option("--profile", xp.profile, "Emitter profile")->capture_default_str();

  exp::DownsampleOptions xd;
  std::string xd_rates = "16M,12M,8M,4M,3M,2M,1M,500k", xd_classes = "prog0,prog1,prog2,prog3";
  auto* exp_down = add_exp("exp-downsample", "Accuracy against sample rate experiment", xd_c);
  exp_down->add_option("--per-class", xd.per_class, "Traces per class")->capture_default_str();
  exp_down->add_option("--folds", xd.folds, "Cross-validation folds")->capture_default_str();
  exp_down->add_option("--rates", xd_rates, "Down-sampled rates")->capture_default_str();
  exp_down->add_option("--classes", xd_classes, "Classes used")->capture_default_str();
  exp_down->add_option("--max-gap", xd.max_gap, "Allowed |acc(4 MHz) - acc(20 MHz)|")->capture_default_str();
  exp_down->add_option("--min-drop", xd.min_drop, "Required acc(4 MHz) - acc(0.5 MHz)")->capture_default_str();
  exp_down->add_option("--profile", xd.profile, "Emitter profile")->capture_default_str();

  exp::TamperOptions xt;
  auto* exp_tamper = add_exp("exp-tamper", "Firmware modification detection experiment", xt_c);
  exp_tamper->add_option("--train", xt.train, "Legitimate training traces")->capture_default_str();
  exp_tamper->add_option("--holdout", xt.holdout, "Legitimate hold-out traces")->capture_default_str();
  exp_tamper->add_option("--per-variant", xt.traces_per_variant, "Traces per modified program")
      ->capture_default_str();
  exp_tamper->add_option("--nu", xt.nu, "One-class SVM nu")->capture_default_str();
  exp_tamper->add_option("--gamma-factor", xt.gamma_factor, "Multiplier of the scale rule")
      ->capture_default_str();
  exp_tamper->add_option("--max-legit-error", xt.max_legit_error, "Pass threshold")->capture_default_str();
  exp_tamper->add_option("--profile", xt.profile, "Emitter profile")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  std::string verb;
  for (auto* sub = app.get_subcommands().front(); sub; ) {
    verb += (verb.empty() ? "" : " ") + sub->get_name();
    auto subs = sub->get_subcommands();
    sub = subs.empty() ? nullptr : subs.front();
  }
  auto finish = [&](int code) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::cerr << "emsca " << verb << ": runtime " << format_fixed(s, 2) << " s\n";
    return code;
  };

  auto run_experiment = [&](const std::string& name, Common& c, auto&& fn) {
    const fs::path out = exp_out.empty() ? fs::path("results") / name : fs::path(exp_out);
    fs::create_directories(out);
    const exp::Outcome outcome = fn();
    for (const auto& [file, contents] : outcome.files) text::write_file(out / file, contents);
    text::write_file(out / "report.txt", outcome.report);
    if (!c.result.empty()) text::write_file(c.result, outcome.files.at("summary.csv"));
    std::cout << outcome.report << "results written to " << out.string() << '\n';
    return outcome.passed ? kExitOk : kExitFailed;
  };

  try {
    if (*synth) {
      const EmitterProfile profile = resolve_profile(synth_profile);
      const double rate = parse_rate(synth_rate);
      IQTrace t = synth_trace(profile, synth_class, synth_duration, rate, synth_c.seed);
      write_trace(t, synth_out);
      std::cout << t.size() << " samples, " << t.payload_bytes() << " bytes ("
                << size_text(t.payload_bytes()) << ") written to " << synth_out << '\n';
      write_result(synth_c.result, {{"path", synth_out},
                                    {"class", synth_class},
                                    {"sample_rate_hz", format_double(rate)},
                                    {"samples", std::to_string(t.size())},
                                    {"payload_bytes", std::to_string(t.payload_bytes())},
                                    {"seed", std::to_string(synth_c.seed)}});
      return finish(kExitOk);
    }
    if (*cbuild) {
      CorpusSpec spec;
      spec.per_class = cb_per_class;
      spec.duration_s = cb_duration;
      spec.sample_rate_hz = parse_rate(cb_rate);
      spec.seed = cb_c.seed;
      spec.classes = parse_list(cb_classes);
      const auto m = build_corpus(resolve_profile(cb_profile), spec, cb_out);
      const auto budget = m.total_payload_bytes();
      std::cout << m.entries.size() << " traces in " << m.labels().size() << " classes, "
                << budget << " payload bytes (" << size_text(budget) << ") under " << cb_out << '\n';
      write_result(cb_c.result, {{"root", cb_out},
                                 {"traces", std::to_string(m.entries.size())},
                                 {"classes", std::to_string(m.labels().size())},
                                 {"payload_bytes", std::to_string(budget)},
                                 {"seed", std::to_string(cb_c.seed)}});
      return finish(kExitOk);
    }
    if (*csplit) {
      const auto m = load_manifest(cs_in);
      const auto [train_m, test_m] = split(m, cs_fraction, cs_c.seed);
      const fs::path train_path = m.root / "manifest.train.tsv";
      const fs::path test_path = m.root / "manifest.test.tsv";
      text::write_file(train_path, format_manifest(train_m));
      text::write_file(test_path, format_manifest(test_m));
      std::cout << train_m.entries.size() << " train -> " << train_path.string() << '\n'
                << test_m.entries.size() << " test -> " << test_path.string() << '\n';
      write_result(cs_c.result, {{"train", std::to_string(train_m.entries.size())},
                                 {"test", std::to_string(test_m.entries.size())},
                                 {"seed", std::to_string(cs_c.seed)}});
      return finish(kExitOk);
    }
    if (*cverify) {
      const auto m = load_manifest(cv_in);
      const auto issues = verify(m);
      for (const auto& i : issues) std::cout << i.path << ": " << i.problem << '\n';
      std::cout << m.entries.size() << " entries checked, " << issues.size() << " issues\n";
      write_result(cv_c.result, {{"entries", std::to_string(m.entries.size())},
                                 {"issues", std::to_string(issues.size())}});
      return finish(issues.empty() ? kExitOk : kExitFailed);
    }
    if (*resample) {
      const auto src = load_manifest(rs_in);
      const auto dst = resample_corpus(src, parse_rate(rs_rate), rs_out);
      const double frac = static_cast<double>(dst.total_payload_bytes()) /
                          static_cast<double>(src.total_payload_bytes());
      std::cout << dst.entries.size() << " traces resampled to " << rs_rate << ": "
                << dst.total_payload_bytes() << " bytes (" << format_fixed(100.0 * frac, 2)
                << "% of " << src.total_payload_bytes() << ")\n";
      write_result(rs_c.result, {{"traces", std::to_string(dst.entries.size())},
                                 {"source_bytes", std::to_string(src.total_payload_bytes())},
                                 {"payload_bytes", std::to_string(dst.total_payload_bytes())},
                                 {"payload_fraction", format_fixed(frac, 6)}});
      return finish(kExitOk);
    }
    if (*features) {
      const auto traces = load_inputs(ft_in, ft_label);
      const FeatureConfig fc = ft_flags.config();
      const Dataset ds = batch_features(traces, fc);
      save_dataset(ds, ft_out);
      std::cout << ds.rows() << " rows x " << ds.feature_dim << " features, " << ds.n_classes()
                << " classes -> " << ft_out << '\n';
      write_result(ft_c.result, {{"rows", std::to_string(ds.rows())},
                                 {"features", std::to_string(ds.feature_dim)},
                                 {"classes", std::to_string(ds.n_classes())},
                                 {"reduction", to_string(fc.reduction)}});
      return finish(kExitOk);
    }
    if (*trainc) {
      const Dataset ds = load_dataset(tr_data);
      tr_cfg.hidden_layers = parse_layers(tr_hidden);
      tr_cfg.seed = tr_c.seed;
      TrainLog log;
      const MlpModel model = train(ds, tr_cfg, &log);
      save_model(model, tr_out);
      const auto rep = evaluate(model, ds);
      std::cout << "trained " << log.epoch_loss.size() << " epochs"
                << (log.early_stopped ? " (early stop)" : "") << ", final loss "
                << format_fixed(log.epoch_loss.back(), 6) << ", training accuracy "
                << format_fixed(rep.accuracy, 4) << " -> " << tr_out << '\n';
      write_result(tr_c.result, {{"epochs", std::to_string(log.epoch_loss.size())},
                                 {"final_loss", format_fixed(log.epoch_loss.back(), 9)},
                                 {"training_accuracy", format_fixed(rep.accuracy, 6)},
                                 {"seed", std::to_string(tr_c.seed)}});
      return finish(kExitOk);
    }
    if (*eval) {
      const auto rep = evaluate(load_model(ev_model), load_dataset(ev_data));
      std::cout << format_classification_table(rep) << '\n' << format_confusion(rep);
      KeyValues kv{{"accuracy", format_fixed(rep.accuracy, 6)},
                   {"macro_f1", format_fixed(rep.macro_f1, 6)},
                   {"samples", std::to_string(rep.total)}};
      for (std::size_t c = 0; c < rep.class_table.size(); ++c) {
        kv.emplace_back("f1_" + rep.class_table[c], format_fixed(rep.f1[c], 6));
      }
      write_result(ev_c.result, kv);
      return finish(kExitOk);
    }
    if (*crossval) {
      xv_cfg.hidden_layers = parse_layers(xv_hidden);
      xv_cfg.seed = xv_c.seed;
      const auto cv = cross_validate(load_dataset(xv_data), xv_cfg, xv_folds);
      std::cout << format_classification_table(cv.pooled) << '\n'
                << format_confusion(cv.pooled) << '\n'
                << cv.k << "-fold accuracy " << format_fixed(cv.mean_accuracy, 4) << " +- "
                << format_fixed(cv.ci95_halfwidth, 4) << " (95% CI)\n";
      text::write_file(xv_c.result, crossval_csv(cv));
      return finish(kExitOk);
    }
    if (*nfit) {
      nf_cfg.seed = nf_c.seed;
      const auto model = fit_novelty(load_dataset(nf_data), nf_cfg);
      save_novelty(model, nf_out);
      std::cout << "support vectors " << model.n_support() << " of " << model.training_rows
                << ", gamma " << format_double(model.gamma) << ", rho " << format_double(model.rho)
                << " -> " << nf_out << '\n';
      write_result(nf_c.result, {{"support_vectors", std::to_string(model.n_support())},
                                 {"training_rows", std::to_string(model.training_rows)},
                                 {"gamma", format_double(model.gamma)},
                                 {"rho", format_double(model.rho)}});
      return finish(kExitOk);
    }
    if (*ndetect) {
      const auto model = load_novelty(nd_model);
      const auto traces = load_inputs(nd_in, std::nullopt);
      const auto summary = detect_tampering(model, traces, nd_flags.config());
      std::cout << format_verdicts(summary);
      std::string csv = "id,score,novel\n";
      for (const auto& v : summary.verdicts) {
        csv += csv_escape(v.id) + ',' + format_fixed(v.score, 9) + ',' + (v.novel ? "1" : "0") + '\n';
      }
      text::write_file(nd_c.result, csv);
      return finish(kExitOk);
    }
    if (*serve) {
      ServeOptions opts;
      opts.sample_rate_hz = parse_rate(sv_rate);
      opts.chunk_s = sv_chunk_ms / 1000.0;
      opts.pace = !sv_no_pace;
      std::unique_ptr<SampleSource> source;
      if (!sv_trace.empty()) {
        auto trace = std::make_shared<IQTrace>(read_trace(sv_trace));
        source = std::make_unique<TraceSource>(trace, sv_repeat);
      } else {
        source = std::make_unique<ScheduleSource>(resolve_profile(sv_profile),
                                                  parse_schedule(sv_schedule), opts.sample_rate_hz,
                                                  sv_duration, sv_c.seed);
      }
      Listener listener(parse_endpoint(sv_listen));
      std::cout << "listening on " << listener.endpoint().to_string() << std::endl;
      const auto res = serve_stream(listener, *source, opts);
      std::cout << res.bytes_sent << " bytes sent in " << format_fixed(res.elapsed_s, 3) << " s"
                << (res.client_disconnected ? " (client disconnected)" : "") << '\n';
      write_result(sv_c.result, {{"bytes_sent", std::to_string(res.bytes_sent)},
                                 {"elapsed_s", format_fixed(res.elapsed_s, 6)},
                                 {"client_disconnected", res.client_disconnected ? "1" : "0"}});
      return finish(kExitOk);
    }
    if (*watch) {
      const MlpModel model = load_model(wa_model);
      wa_cfg.sample_rate_hz = parse_rate(wa_rate);
      wa_cfg.window_s = wa_window_ms / 1000.0;
      const FeatureConfig fc = wa_flags.config();
      if (!wa_quiet) std::cout << "seq\tlabel\tscore\tdelay_ms\n";
      const auto stats = consume_stream(parse_endpoint(wa_connect), model, fc, wa_cfg,
                                        [&](const WindowResult& r) {
                                          if (wa_quiet) return;
                                          std::cout << r.seq << '\t' << r.class_name << '\t'
                                                    << format_fixed(r.score, 4) << '\t'
                                                    << format_fixed(r.delay_ms, 3)
                                                    << (r.overrun ? "\tOVERRUN" : "") << '\n';
                                        });
      const auto rep = latency_report(wa_cfg.sample_rate_hz, wa_cfg.window_len(), wa_cfg.deadline_ms, stats);
      std::cout << format_latency_table(std::span(&rep, 1));
      if (stats.truncated_bytes) {
        std::cerr << "warning: stream ended inside a sample (" << stats.truncated_bytes
                  << " trailing bytes)\n";
      }
      write_result(wa_c.result, {{"windows", std::to_string(stats.windows)},
                                 {"overruns", std::to_string(stats.overruns)},
                                 {"backpressure_events", std::to_string(stats.backpressure_events)},
                                 {"samples_received", std::to_string(stats.samples_received)},
                                 {"truncated_bytes", std::to_string(stats.truncated_bytes)},
                                 {"p95_ms", format_fixed(rep.p95_ms, 3)}});
      return finish(stats.overruns == 0 ? kExitOk : kExitFailed);
    }
    if (*bench) {
      const auto rates = parse_rates(be_rates);
      const FeatureConfig fc = be_flags.config();
      be_opts.window_s = be_window_ms / 1000.0;
      const EmitterProfile profile = resolve_profile(be_profile);
      profile.find_class(be_class);
      MlpModel model;
      if (be_model.empty()) {
        double lowest = rates.front();
        for (double r : rates) lowest = std::min(lowest, r);
        model = quick_model(profile, fc, lowest, be_c.seed);
      } else {
        model = load_model(be_model);
      }
      // A short pre-rendered clip replayed in a loop keeps the server cheap.
      const SourceFactory make_source = [&](double rate) -> std::unique_ptr<SampleSource> {
        auto clip = std::make_shared<IQTrace>(synth_trace(profile, be_class, 0.1, rate, be_c.seed));
        const double needed = be_window_ms / 1000.0 * static_cast<double>(be_opts.windows);
        const auto repeats = static_cast<std::size_t>(std::ceil(needed / 0.1)) + 1;
        return std::make_unique<TraceSource>(clip, repeats);
      };
      const auto reports = benchmark_latency(rates, model, fc, make_source, be_opts);
      std::cout << format_latency_table(reports);
      bool ok = true;
      std::string csv = "rate_hz,window_samples,windows,min_ms,mean_ms,p95_ms,max_ms,deadline_ms,overruns,backpressure\n";
      for (const auto& r : reports) {
        ok = ok && r.overruns == 0 && r.p95_ms < be_max_p95;
        csv += format_double(r.sample_rate_hz) + ',' + std::to_string(r.window_len_samples) + ',' +
               std::to_string(r.windows) + ',' + format_fixed(r.min_ms, 3) + ',' +
               format_fixed(r.mean_ms, 3) + ',' + format_fixed(r.p95_ms, 3) + ',' +
               format_fixed(r.max_ms, 3) + ',' + format_fixed(r.deadline_ms, 1) + ',' +
               std::to_string(r.overruns) + ',' + std::to_string(r.backpressure_events) + '\n';
      }
      std::cout << "check zero overruns at " << format_fixed(be_opts.deadline_ms, 0)
                << " ms and p95 < " << format_fixed(be_max_p95, 0) << " ms at every rate: "
                << (ok ? "PASS" : "FAIL") << '\n';
      text::write_file(be_c.result, csv);
      return finish(ok ? kExitOk : kExitFailed);
    }
    if (*exp_crypto) {
      xc.seed = xc_c.seed;
      return finish(run_experiment("exp-crypto", xc_c, [&] { return exp::run_crypto(xc); }));
    }
    if (*exp_programs) {
      xp.seed = xp_c.seed;
      return finish(run_experiment("exp-programs", xp_c, [&] { return exp::run_programs(xp); }));
    }
    if (*exp_down) {
      xd.seed = xd_c.seed;
      xd.rates_hz = parse_rates(xd_rates);
      xd.classes = parse_list(xd_classes);
      return finish(run_experiment("exp-downsample", xd_c, [&] { return exp::run_downsample(xd); }));
    }
    if (*exp_tamper) {
      xt.seed = xt_c.seed;
      return finish(run_experiment("exp-tamper", xt_c, [&] { return exp::run_tamper(xt); }));
    }
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return finish(exit_code_for(e.code()));
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return finish(kExitError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return finish(kExitError);
  }
  return kExitUsage;
}

}  // namespace emsca::cli
