#include <doctest.h>

#include <sys/socket.h>

#include <algorithm>
#include <numeric>
#include <thread>

#include "emsca/realtime_stream.hpp"
#include "helpers.hpp"

using namespace emsca;
using testing::error_code_of;

namespace {

std::shared_ptr<const IQTrace> clip(const std::string& cls, double seconds, double rate, std::uint64_t seed) {
  return std::make_shared<const IQTrace>(synth_trace(default_profiles().low_end, cls, seconds, rate, seed));
}

MlpModel zero_model(std::size_t input_dim) {
  const std::vector<std::size_t> topo{input_dim, 3, 2};
  return make_model(topo, {"a", "b"});
}

/// Serves `source` to one client on a background thread.
struct LoopbackServer {
  Listener listener{Endpoint{"127.0.0.1", 0}};
  ServeResult result;
  std::thread thread;

  LoopbackServer(SampleSource& source, ServeOptions opts) {
    thread = std::thread([this, &source, opts] { result = serve_stream(listener, source, opts); });
  }
  ~LoopbackServer() {
    if (thread.joinable()) thread.join();
  }
  Endpoint endpoint() const { return listener.endpoint(); }
};

}  // namespace

TEST_SUITE("realtime-stream") {

TEST_CASE("endpoint and schedule parsing") {
  const Endpoint e = parse_endpoint("10.0.0.2:5000");
  CHECK(e.host == "10.0.0.2");
  CHECK(e.port == 5000);
  const Endpoint l = parse_endpoint(":7000");
  CHECK(l.host == "127.0.0.1");
  CHECK(l.port == 7000);
  CHECK(e.to_string() == "10.0.0.2:5000");
  for (const char* bad : {"host", "h:99999", "h:abc", "h:"}) {
    CAPTURE(bad);
    CHECK(error_code_of([&] { parse_endpoint(bad); }) == Errc::invalid_argument);
  }

  const auto s = parse_schedule("prog3@2.5,prog0@0");
  REQUIRE(s.size() == 2);
  CHECK(s[0].class_id == "prog0");
  CHECK(s[0].start_s == 0.0);
  CHECK(s[1].class_id == "prog3");
  CHECK(s[1].start_s == 2.5);
  CHECK(parse_schedule("prog0")[0].start_s == 0.0);
  for (const char* bad : {"prog0@x", "@1", "prog0@-1", ""}) {
    CAPTURE(bad);
    CHECK(error_code_of([&] { parse_schedule(bad); }) == Errc::invalid_argument);
  }
}

TEST_CASE("bounded queue keeps order, blocks when full and drains on close") {
  BoundedQueue<int> q(2);
  CHECK_FALSE(q.push(1));
  CHECK_FALSE(q.push(2));
  bool waited = false;
  std::thread producer([&] { waited = q.push(3); });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(q.pop() == std::optional<int>(1));
  producer.join();
  CHECK(waited);
  q.close();
  CHECK(q.pop() == std::optional<int>(2));
  CHECK(q.pop() == std::optional<int>(3));
  CHECK(q.pop() == std::nullopt);
}

TEST_CASE("loopback stream loses no samples") {
  const double rate = 2e6;
  StreamConfig cfg;
  cfg.sample_rate_hz = rate;
  cfg.window_s = 0.005;
  const std::size_t len = cfg.window_len();
  CHECK(len == 10000);

  auto trace = clip("prog1", 0.05, rate, 3);
  auto longer = std::make_shared<IQTrace>(*trace);
  longer->samples.resize(10 * len + 123, ComplexSample(0.5f, 0.0f));
  TraceSource source(longer);
  LoopbackServer server(source, ServeOptions{rate, 0.002, false});

  FeatureConfig fc = program_feature_config();
  fc.segment_s = cfg.window_s;
  fc.n_buckets = 100;
  std::vector<std::uint64_t> seqs;
  const StreamStats st = consume_stream(server.endpoint(), zero_model(100), fc, cfg,
                                        [&](const WindowResult& r) { seqs.push_back(r.seq); });
  server.thread.join();
  CHECK(server.result.bytes_sent == (10 * len + 123) * 8);
  CHECK(st.samples_received == 10 * len + 123);
  CHECK(st.windows == 10);
  CHECK(st.tail_samples == 123);
  CHECK(st.truncated_bytes == 0);
  CHECK(st.delays_ms.size() == 10);
  std::vector<std::uint64_t> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(seqs == expect);
}

TEST_CASE("a partial trailing sample is reported") {
  Listener listener(Endpoint{"127.0.0.1", 0});
  const std::size_t n = 2500;
  std::thread sender([&] {
    Socket c = listener.accept();
    std::vector<char> bytes(n * 8 + 3, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t w = ::send(c.fd(), bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (w <= 0) break;
      off += static_cast<std::size_t>(w);
    }
  });
  StreamConfig cfg;
  cfg.sample_rate_hz = 100e3;
  cfg.window_s = 0.01;
  FeatureConfig fc = program_feature_config();
  fc.n_buckets = 50;
  const StreamStats st = consume_stream(listener.endpoint(), zero_model(50), fc, cfg);
  sender.join();
  CHECK(st.truncated_bytes == 3);
  CHECK(st.samples_received == n);
  CHECK(st.windows == 2);
  CHECK(st.tail_samples == 500);
}

TEST_CASE("paced serving holds 8 bytes per sample per second") {
  const double rate = 20e6;
  TraceSource source(clip("prog0", 0.05, rate, 1), 20);
  Listener listener(Endpoint{"127.0.0.1", 0});
  std::uint64_t drained = 0;
  std::thread reader([&] {
    Socket c = connect_to(listener.endpoint());
    std::vector<char> buf(1 << 20);
    for (;;) {
      const ssize_t r = ::recv(c.fd(), buf.data(), buf.size(), 0);
      if (r <= 0) break;
      drained += static_cast<std::uint64_t>(r);
    }
  });
  const ServeResult res = serve_stream(listener, source, ServeOptions{rate, 0.002, true});
  reader.join();
  CHECK(res.bytes_sent == 160000000ULL);
  CHECK(drained == 160000000ULL);
  MESSAGE("paced 1 s of 20 MHz in " << res.elapsed_s << " s");
  CHECK(res.elapsed_s == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("stream configuration errors") {
  StreamConfig cfg;
  cfg.sample_rate_hz = 0.0;
  CHECK(error_code_of([&] { cfg.validate(); }) == Errc::invalid_argument);

  cfg.sample_rate_hz = 1e6;
  TraceSource source(clip("prog0", 0.02, 1e6, 1));
  LoopbackServer server(source, ServeOptions{1e6, 0.002, false});
  FeatureConfig fc = program_feature_config();
  fc.n_buckets = 100;
  CHECK(error_code_of([&] { consume_stream(server.endpoint(), zero_model(99), fc, cfg); }) == Errc::shape);
}

TEST_CASE("an impossible deadline marks every window as overrun") {
  TraceSource source(clip("prog0", 0.05, 1e6, 2));
  LoopbackServer server(source, ServeOptions{1e6, 0.002, false});
  StreamConfig cfg;
  cfg.sample_rate_hz = 1e6;
  cfg.deadline_ms = 1e-9;
  FeatureConfig fc = program_feature_config();
  fc.n_buckets = 100;
  std::size_t flagged = 0;
  const StreamStats st =
      consume_stream(server.endpoint(), zero_model(100), fc, cfg, [&](const WindowResult& r) { flagged += r.overrun; });
  CHECK(st.windows == 5);
  CHECK(st.overruns == 5);
  CHECK(flagged == 5);
}

TEST_CASE("latency report uses nearest-rank p95") {
  StreamStats st;
  for (int i = 100; i >= 1; --i) st.delays_ms.push_back(i);
  st.windows = 100;
  st.overruns = 4;
  const LatencyReport r = latency_report(4e6, 40000, 200.0, st);
  CHECK(r.p95_ms == 95.0);
  CHECK(r.min_ms == 1.0);
  CHECK(r.max_ms == 100.0);
  CHECK(r.mean_ms == doctest::Approx(50.5));
  CHECK(r.windows == 100);
  CHECK(r.overruns == 4);

  StreamStats three;
  three.delays_ms = {3.0, 1.0, 2.0};
  CHECK(latency_report(1e6, 1, 1.0, three).p95_ms == 3.0);
}

TEST_CASE("benchmark: mean delay does not grow as the rate drops") {
  FeatureConfig fc = program_feature_config();
  const MlpModel model = zero_model(fc.n_buckets);
  const SourceFactory make = [](double rate) -> std::unique_ptr<SampleSource> {
    return std::make_unique<TraceSource>(clip("prog0", 0.05, rate, 4), 21);
  };
  BenchmarkOptions opts;
  opts.windows = 100;
  const std::vector<double> rates{20e6, 16e6, 12e6, 8e6, 4e6};
  const auto reports = benchmark_latency(rates, model, fc, make, opts);
  REQUIRE(reports.size() == 5);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CAPTURE(rates[i]);
    CHECK(reports[i].windows == 100);
    CHECK(reports[i].window_len_samples == static_cast<std::size_t>(rates[i] * 0.01));
    CHECK(reports[i].overruns == 0);
    if (i) CHECK(reports[i].mean_ms <= reports[i - 1].mean_ms);
  }
  const std::string table = format_latency_table(reports);
  MESSAGE(table);
  CHECK(table.find("p95") != std::string::npos);

  opts.windows = 0;
  CHECK(error_code_of([&] { benchmark_latency(rates, model, fc, make, opts); }) == Errc::invalid_argument);
}

TEST_CASE("live classification of a synthesized program stream") {
  const auto p = default_profiles().low_end;
  const double rate = 4e6;
  const FeatureConfig fc = program_feature_config();
  // Trained once; doctest re-enters the case for every subcase.
  static const MlpModel model = [&] {
    std::vector<FeatureVector> rows;
    for (const auto& c : p.class_ids()) {
      for (std::size_t i = 0; i < 400; ++i) rows.push_back(make_features(synth_trace(p, c, 0.01, rate, 1000 + i), fc));
    }
    MlpConfig mc;
    mc.hidden_layers = {10, 3};
    return train(assemble_dataset(rows), mc);
  }();

  StreamConfig cfg;
  cfg.sample_rate_hz = rate;

  SUBCASE("steady prog3") {
    ScheduleSource source(p, parse_schedule("prog3@0"), rate, 1.0, 77);
    LoopbackServer server(source, ServeOptions{rate, 0.002, false});
    std::size_t hits = 0, total = 0;
    consume_stream(server.endpoint(), model, fc, cfg, [&](const WindowResult& r) {
      ++total;
      hits += r.class_name == "prog3";
    });
    MESSAGE("prog3 windows: " << hits << "/" << total);
    CHECK(total == 100);
    CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.90);
  }

  SUBCASE("schedule switch shows up within three windows") {
    ScheduleSource source(p, parse_schedule("prog0@0,prog3@0.5"), rate, 1.0, 78);
    CHECK(source.class_at(0.49) == "prog0");
    CHECK(source.class_at(0.5) == "prog3");
    LoopbackServer server(source, ServeOptions{rate, 0.002, false});
    std::vector<std::string> labels;
    consume_stream(server.endpoint(), model, fc, cfg, [&](const WindowResult& r) { labels.push_back(r.class_name); });
    REQUIRE(labels.size() == 100);
    CHECK(std::find(labels.begin() + 50, labels.begin() + 53, "prog3") != labels.begin() + 53);
  }
}

}  // TEST_SUITE
