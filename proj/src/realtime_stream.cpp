#include "emsca/realtime_stream.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "emsca/error.hpp"
#include "emsca/rng.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kBlockTag = 0x626c6b;  // "blk"

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (ep.host.empty() || ep.host == "*") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || !res) {
    fail(Errc::network, "cannot resolve host '" + ep.host + "': " + gai_strerror(rc));
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    fail(Errc::invalid_argument, "endpoint '" + std::string(text) + "' is not host:port");
  }
  const auto port = text::parse_u64(text.substr(colon + 1));
  if (!port || *port > 65535) {
    fail(Errc::invalid_argument, "endpoint '" + std::string(text) + "' has a bad port");
  }
  Endpoint ep;
  if (colon > 0) ep.host = std::string(text.substr(0, colon));
  ep.port = static_cast<std::uint16_t>(*port);
  return ep;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.release();
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(const Endpoint& endpoint) : host_(endpoint.host) {
  socket_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!socket_.valid()) fail(Errc::network, "socket: " + errno_text());
  const int one = 1;
  ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(endpoint);
  if (::bind(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    fail(Errc::network, "cannot bind " + endpoint.to_string() + ": " + errno_text());
  }
  if (::listen(socket_.fd(), 4) != 0) fail(Errc::network, "listen: " + errno_text());
  socklen_t len = sizeof addr;
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Socket Listener::accept() {
  for (;;) {
    const int fd = ::accept(socket_.fd(), nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno != EINTR) fail(Errc::network, "accept: " + errno_text());
  }
}

Socket connect_to(const Endpoint& endpoint) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) fail(Errc::network, "socket: " + errno_text());
  sockaddr_in addr = resolve(endpoint);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    fail(Errc::network, "cannot connect to " + endpoint.to_string() + ": " + errno_text());
  }
  return s;
}

TraceSource::TraceSource(std::shared_ptr<const IQTrace> trace, std::size_t repeats)
    : trace_(std::move(trace)), repeats_left_(repeats) {
  if (!trace_) fail(Errc::invalid_argument, "TraceSource needs a trace");
}

std::size_t TraceSource::read(std::span<ComplexSample> out) {
  std::size_t n = 0;
  const auto& s = trace_->samples;
  while (n < out.size() && repeats_left_ > 0 && !s.empty()) {
    const std::size_t take = std::min(out.size() - n, s.size() - pos_);
    std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(pos_), take, out.begin() + static_cast<std::ptrdiff_t>(n));
    n += take;
    pos_ += take;
    if (pos_ == s.size()) {
      pos_ = 0;
      --repeats_left_;
    }
  }
  return n;
}

std::vector<ScheduleEntry> parse_schedule(std::string_view text) {
  std::vector<ScheduleEntry> out;
  for (auto item : text::split(text, ',')) {
    item = text::trim(item);
    if (item.empty()) continue;
    const auto at = item.find('@');
    ScheduleEntry e;
    e.class_id = std::string(text::trim(item.substr(0, at)));
    if (at != std::string_view::npos) {
      const auto t = text::parse_double(text::trim(item.substr(at + 1)));
      if (!t || *t < 0.0) {
        fail(Errc::invalid_argument, "bad schedule time in '" + std::string(item) + "'");
      }
      e.start_s = *t;
    }
    if (e.class_id.empty()) fail(Errc::invalid_argument, "schedule entry without a class");
    out.push_back(std::move(e));
  }
  if (out.empty()) fail(Errc::invalid_argument, "empty schedule");
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  return out;
}

ScheduleSource::ScheduleSource(EmitterProfile profile, std::vector<ScheduleEntry> schedule,
                               double sample_rate_hz, double duration_s, std::uint64_t seed,
                               double block_s)
    : profile_(std::move(profile)), schedule_(std::move(schedule)), rate_(sample_rate_hz), seed_(seed) {
  if (!(sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "sample rate must be positive");
  if (!(duration_s > 0.0)) fail(Errc::invalid_argument, "duration must be positive");
  if (schedule_.empty()) fail(Errc::invalid_argument, "empty schedule");
  for (const auto& e : schedule_) profile_.find_class(e.class_id);
  total_ = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  block_len_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(block_s * sample_rate_hz)));
}

const std::string& ScheduleSource::class_at(double t_s) const {
  const ScheduleEntry* current = &schedule_.front();
  for (const auto& e : schedule_) {
    if (e.start_s <= t_s) current = &e;
  }
  return current->class_id;
}

std::size_t ScheduleSource::read(std::span<ComplexSample> out) {
  std::size_t n = 0;
  while (n < out.size() && produced_ < total_) {
    if (block_pos_ == block_.size()) {
      const double t0 = static_cast<double>(block_index_ * block_len_) / rate_;
      const double block_dur = static_cast<double>(block_len_) / rate_;
      block_ = synth_trace(profile_, class_at(t0), block_dur, rate_,
                           derive_seed(seed_, kBlockTag, block_index_))
                   .samples;
      block_pos_ = 0;
      ++block_index_;
    }
    const std::size_t take = std::min({out.size() - n, block_.size() - block_pos_, total_ - produced_});
    std::copy_n(block_.begin() + static_cast<std::ptrdiff_t>(block_pos_), take,
                out.begin() + static_cast<std::ptrdiff_t>(n));
    n += take;
    block_pos_ += take;
    produced_ += take;
  }
  return n;
}

ServeResult serve_connection(Socket& connection, SampleSource& source, const ServeOptions& options) {
  if (!(options.sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "serve rate must be positive");
  if (!(options.chunk_s > 0.0)) fail(Errc::invalid_argument, "chunk duration must be positive");
  const std::size_t chunk =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.chunk_s * options.sample_rate_hz)));
  std::vector<ComplexSample> samples(chunk);
  std::vector<std::byte> bytes;
  ServeResult result;
  const auto start = Clock::now();
  std::uint64_t sent_samples = 0;
  for (;;) {
    const std::size_t n = source.read(samples);
    if (n == 0) break;
    if (options.pace) {
      const auto due = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(
                                   static_cast<double>(sent_samples) / options.sample_rate_hz));
      std::this_thread::sleep_until(due);
    }
    encode_cf32(std::span(samples).first(n), bytes);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t w = ::send(connection.fd(), bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        if (errno == EPIPE || errno == ECONNRESET) {
          result.client_disconnected = true;
          result.bytes_sent += off;
          result.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
          return result;
        }
        fail(Errc::network, "send: " + errno_text());
      }
      off += static_cast<std::size_t>(w);
    }
    result.bytes_sent += bytes.size();
    sent_samples += n;
  }
  ::shutdown(connection.fd(), SHUT_WR);
  result.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

ServeResult serve_stream(Listener& listener, SampleSource& source, const ServeOptions& options) {
  if (!(options.sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "serve rate must be positive");
  Socket conn = listener.accept();
  return serve_connection(conn, source, options);
}

std::size_t StreamConfig::window_len() const {
  return static_cast<std::size_t>(std::llround(window_s * sample_rate_hz));
}

std::size_t StreamConfig::hop_len() const {
  return hop_s > 0.0 ? static_cast<std::size_t>(std::llround(hop_s * sample_rate_hz)) : window_len();
}

void StreamConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) fail(Errc::invalid_argument, "stream sample rate must be positive");
  if (!(window_s > 0.0) || window_len() == 0) fail(Errc::invalid_argument, "window must hold at least one sample");
  if (hop_s < 0.0 || hop_len() == 0 || hop_len() > window_len()) {
    fail(Errc::invalid_argument, "hop must lie in (0, window]");
  }
  if (!(deadline_ms > 0.0)) fail(Errc::invalid_argument, "deadline must be positive");
  if (queue_capacity == 0) fail(Errc::invalid_argument, "queue capacity must be >= 1");
}

StreamStats consume_connection(Socket& connection, const MlpModel& model,
                               const FeatureConfig& features, const StreamConfig& config,
                               const std::function<void(const WindowResult&)>& on_result) {
  config.validate();
  features.validate();
  if (model.input_dim() != features.n_buckets) {
    fail(Errc::shape, "model expects " + std::to_string(model.input_dim()) +
                          " features, feature configuration yields " + std::to_string(features.n_buckets));
  }
  const std::size_t segment_len =
      static_cast<std::size_t>(std::llround(features.segment_s * config.sample_rate_hz));
  if (segment_len > config.window_len()) {
    fail(Errc::invalid_argument, "feature segment is longer than the stream window");
  }

  BoundedQueue<StreamWindow> queue(config.queue_capacity);
  StreamStats stats;
  std::atomic<bool> stop{false};
  std::exception_ptr reader_error;

  std::thread reader([&] {
    const std::size_t win = config.window_len();
    const std::size_t hop = config.hop_len();
    std::vector<std::byte> buf(1 << 16);
    std::size_t carry = 0;  // bytes of an incomplete sample at the front of buf
    std::vector<ComplexSample> pending;
    std::size_t head = 0;
    std::uint64_t seq = 0;
    try {
      while (!stop.load()) {
        const ssize_t r = ::recv(connection.fd(), buf.data() + carry, buf.size() - carry, 0);
        if (r < 0) {
          if (errno == EINTR) continue;
          if (stop.load()) break;
          fail(Errc::network, "recv: " + errno_text());
        }
        if (r == 0) break;
        const std::size_t have = carry + static_cast<std::size_t>(r);
        const std::size_t whole = have - have % kBytesPerSample;
        const auto decoded = decode_cf32(std::span(buf).first(whole));
        stats.samples_received += decoded.size();
        carry = have - whole;
        std::memmove(buf.data(), buf.data() + whole, carry);
        pending.insert(pending.end(), decoded.begin(), decoded.end());
        while (pending.size() - head >= win && !stop.load()) {
          StreamWindow w;
          w.seq = seq++;
          w.samples.assign(pending.begin() + static_cast<std::ptrdiff_t>(head),
                           pending.begin() + static_cast<std::ptrdiff_t>(head + win));
          w.received_at = Clock::now();
          head += hop;
          if (queue.push(std::move(w))) ++stats.backpressure_events;
        }
        if (head > (1u << 20) || head * 2 > pending.size()) {
          pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(head));
          head = 0;
        }
      }
      stats.truncated_bytes = carry;
      stats.tail_samples = pending.size() - head;
    } catch (...) {
      reader_error = std::current_exception();
    }
    queue.close();
  });

  std::exception_ptr worker_error;
  try {
    while (auto w = queue.pop()) {
      if (stop.load()) continue;  // draining after max_windows
      const auto t0 = Clock::now();
      const auto values = make_feature_values(w->samples, config.sample_rate_hz, features);
      const Prediction p = predict(model, values);
      const auto t1 = Clock::now();
      WindowResult res;
      res.seq = w->seq;
      res.class_name = p.class_name;
      res.score = p.scores[p.class_index];
      res.delay_ms = ms_between(t0, t1);
      res.latency_ms = ms_between(w->received_at, t1);
      res.overrun = res.delay_ms > config.deadline_ms;
      ++stats.windows;
      if (res.overrun) ++stats.overruns;
      stats.delays_ms.push_back(res.delay_ms);
      if (on_result) on_result(res);
      if (config.max_windows && stats.windows >= config.max_windows) {
        stop = true;
        connection.shutdown();
      }
    }
  } catch (...) {
    worker_error = std::current_exception();
    stop = true;
    connection.shutdown();
    while (queue.pop()) {
    }
  }
  reader.join();
  if (worker_error) std::rethrow_exception(worker_error);
  if (reader_error) std::rethrow_exception(reader_error);
  return stats;
}

StreamStats consume_stream(const Endpoint& endpoint, const MlpModel& model,
                           const FeatureConfig& features, const StreamConfig& config,
                           const std::function<void(const WindowResult&)>& on_result) {
  Socket s = connect_to(endpoint);
  return consume_connection(s, model, features, config, on_result);
}

LatencyReport latency_report(double sample_rate_hz, std::size_t window_len, double deadline_ms,
                             const StreamStats& stats) {
  LatencyReport r;
  r.sample_rate_hz = sample_rate_hz;
  r.window_len_samples = window_len;
  r.deadline_ms = deadline_ms;
  r.windows = stats.delays_ms.size();
  r.overruns = stats.overruns;
  r.backpressure_events = stats.backpressure_events;
  if (stats.delays_ms.empty()) return r;
  auto d = stats.delays_ms;
  std::sort(d.begin(), d.end());
  r.min_ms = d.front();
  r.max_ms = d.back();
  r.mean_ms = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
  r.p95_ms = d[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

std::vector<LatencyReport> benchmark_latency(std::span<const double> rates_hz,
                                             const MlpModel& model, const FeatureConfig& features,
                                             const SourceFactory& make_source,
                                             const BenchmarkOptions& options) {
  if (options.windows == 0) fail(Errc::invalid_argument, "benchmark needs at least one window");
  if (rates_hz.empty()) fail(Errc::invalid_argument, "benchmark needs at least one rate");
  for (double r : rates_hz) {
    if (!(r > 0.0)) fail(Errc::invalid_argument, "benchmark rates must be positive");
  }
  std::vector<LatencyReport> out;
  for (double rate : rates_hz) {
    StreamConfig cfg;
    cfg.sample_rate_hz = rate;
    cfg.window_s = options.window_s;
    cfg.deadline_ms = options.deadline_ms;
    cfg.queue_capacity = options.queue_capacity;
    cfg.max_windows = options.windows;
    cfg.validate();

    auto source = make_source(rate);
    Listener listener(Endpoint{"127.0.0.1", 0});
    std::exception_ptr server_error;
    std::thread server([&] {
      try {
        ServeOptions so;
        so.sample_rate_hz = rate;
        serve_stream(listener, *source, so);
      } catch (...) {
        server_error = std::current_exception();
      }
    });
    StreamStats stats;
    std::exception_ptr client_error;
    try {
      stats = consume_stream(listener.endpoint(), model, features, cfg);
    } catch (...) {
      client_error = std::current_exception();
    }
    server.join();
    if (client_error) std::rethrow_exception(client_error);
    if (server_error) std::rethrow_exception(server_error);
    if (stats.windows < options.windows) {
      fail(Errc::network, "stream at " + text::format_double(rate) + " Hz ended after " +
                              std::to_string(stats.windows) + " of " + std::to_string(options.windows) +
                              " windows");
    }
    out.push_back(latency_report(rate, cfg.window_len(), options.deadline_ms, stats));
  }
  return out;
}

std::string format_latency_table(std::span<const LatencyReport> reports) {
  std::ostringstream os;
  os << "rate_mhz  window  windows  min_ms   mean_ms  p95_ms   max_ms   deadline_ms  overruns\n";
  for (const auto& r : reports) {
    auto col = [](std::string s, std::size_t w) {
      s.resize(std::max(s.size(), w), ' ');
      return s;
    };
    os << col(text::format_double(r.sample_rate_hz / 1e6), 8) << "  "
       << col(std::to_string(r.window_len_samples), 6) << "  " << col(std::to_string(r.windows), 7) << "  "
       << col(text::format_fixed(r.min_ms, 3), 7) << "  " << col(text::format_fixed(r.mean_ms, 3), 7) << "  "
       << col(text::format_fixed(r.p95_ms, 3), 7) << "  " << col(text::format_fixed(r.max_ms, 3), 7) << "  "
       << col(text::format_fixed(r.deadline_ms, 1), 11) << "  " << r.overruns << '\n';
  }
  return os.str();
}

}  // namespace emsca
