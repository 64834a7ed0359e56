#pragma once

// Live analysis over a TCP byte stream of raw cf32 samples (no header, no
// framing). A reader thread cuts the stream into fixed windows and hands them
// to a worker through a bounded queue; the worker runs feature extraction and
// classification and reports each window in sequence order.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emsca/emitter_sim.hpp"
#include "emsca/mlp.hpp"
#include "emsca/signal_core.hpp"
#include "emsca/spectral_features.hpp"

namespace emsca {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string to_string() const;
};

/// "host:port" or ":port" (loopback). Throws invalid_argument.
Endpoint parse_endpoint(std::string_view text);

/// Owns a file descriptor; closes on destruction.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept {
    const int f = fd_;
    fd_ = -1;
    return f;
  }
  /// Half-closes or fully shuts the socket so a blocked peer or reader wakes.
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

/// Bound, listening TCP socket. Port 0 picks a free port. Throws network.
class Listener {
 public:
  explicit Listener(const Endpoint& endpoint);
  std::uint16_t port() const noexcept { return port_; }
  Endpoint endpoint() const { return {host_, port_}; }
  Socket accept();

 private:
  Socket socket_;
  std::string host_;
  std::uint16_t port_ = 0;
};

/// Throws network when the connection is refused.
Socket connect_to(const Endpoint& endpoint);

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  /// Fills up to out.size() samples; 0 means exhausted.
  virtual std::size_t read(std::span<ComplexSample> out) = 0;
};

/// Plays a trace `repeats` times back to back.
class TraceSource : public SampleSource {
 public:
  explicit TraceSource(std::shared_ptr<const IQTrace> trace, std::size_t repeats = 1);
  std::size_t read(std::span<ComplexSample> out) override;

 private:
  std::shared_ptr<const IQTrace> trace_;
  std::size_t repeats_left_;
  std::size_t pos_ = 0;
};

struct ScheduleEntry {
  double start_s = 0.0;
  std::string class_id;
};

/// "prog0@0,prog3@2.5" -> entries sorted by start. Throws invalid_argument.
std::vector<ScheduleEntry> parse_schedule(std::string_view text);

/// Synthesizes the emitter live, switching class at the scheduled times.
/// Rendered in blocks of block_s with per-block derived seeds.
class ScheduleSource : public SampleSource {
 public:
  ScheduleSource(EmitterProfile profile, std::vector<ScheduleEntry> schedule, double sample_rate_hz,
                 double duration_s, std::uint64_t seed, double block_s = 0.05);
  std::size_t read(std::span<ComplexSample> out) override;
  const std::string& class_at(double t_s) const;

 private:
  EmitterProfile profile_;
  std::vector<ScheduleEntry> schedule_;
  double rate_;
  std::size_t total_;
  std::size_t block_len_;
  std::uint64_t seed_;
  std::size_t produced_ = 0;
  std::vector<ComplexSample> block_;
  std::size_t block_pos_ = 0;
  std::size_t block_index_ = 0;
};

struct ServeOptions {
  double sample_rate_hz = 0.0;
  /// Bytes go out in chunks of this duration, each released on schedule.
  double chunk_s = 0.002;
  bool pace = true;
};

struct ServeResult {
  std::uint64_t bytes_sent = 0;
  bool client_disconnected = false;
  double elapsed_s = 0.0;
};

/// Writes the source to a connected socket at 8 * rate bytes per second.
ServeResult serve_connection(Socket& connection, SampleSource& source, const ServeOptions& options);
/// Accepts one client on `listener`, then serve_connection.
ServeResult serve_stream(Listener& listener, SampleSource& source, const ServeOptions& options);

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  /// Blocks while full; returns true when it had to wait.
  bool push(T item) {
    std::unique_lock lock(mutex_);
    const bool waited = items_.size() >= capacity_;
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return waited;
  }

  /// nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

struct StreamWindow {
  std::uint64_t seq = 0;
  std::vector<ComplexSample> samples;
  std::chrono::steady_clock::time_point received_at;
};

struct StreamConfig {
  double sample_rate_hz = 0.0;
  double window_s = 0.01;
  /// Distance between window starts; 0 means window_s (no overlap).
  double hop_s = 0.0;
  double deadline_ms = 200.0;
  std::size_t queue_capacity = 16;
  /// Stop after this many windows (0 = until the stream ends).
  std::size_t max_windows = 0;

  std::size_t window_len() const;
  std::size_t hop_len() const;
  void validate() const;
};

struct WindowResult {
  std::uint64_t seq = 0;
  std::string class_name;
  double score = 0.0;
  /// Feature extraction + inference time.
  double delay_ms = 0.0;
  /// From window completion on the wire to result (includes queueing).
  double latency_ms = 0.0;
  bool overrun = false;
};

struct StreamStats {
  std::uint64_t windows = 0;
  std::uint64_t overruns = 0;
  std::uint64_t backpressure_events = 0;
  std::uint64_t samples_received = 0;
  /// Samples received after the last complete window.
  std::uint64_t tail_samples = 0;
  /// Bytes of an incomplete sample at end of stream (truncated-stream warning).
  std::uint64_t truncated_bytes = 0;
  std::vector<double> delays_ms;
};

/// Reads the connection until EOF (or max_windows), classifying each window.
/// on_result is called from the worker thread in seq order. Throws shape when
/// the model input does not match the feature configuration.
StreamStats consume_connection(Socket& connection, const MlpModel& model,
                               const FeatureConfig& features, const StreamConfig& config,
                               const std::function<void(const WindowResult&)>& on_result = {});
StreamStats consume_stream(const Endpoint& endpoint, const MlpModel& model,
                           const FeatureConfig& features, const StreamConfig& config,
                           const std::function<void(const WindowResult&)>& on_result = {});

struct LatencyReport {
  double sample_rate_hz = 0.0;
  std::size_t window_len_samples = 0;
  std::size_t windows = 0;
  double min_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;  // nearest rank
  double max_ms = 0.0;
  double deadline_ms = 0.0;
  std::uint64_t overruns = 0;
  std::uint64_t backpressure_events = 0;
};

LatencyReport latency_report(double sample_rate_hz, std::size_t window_len, double deadline_ms,
                             const StreamStats& stats);

struct BenchmarkOptions {
  double window_s = 0.01;
  std::size_t windows = 100;
  double deadline_ms = 200.0;
  std::size_t queue_capacity = 16;
};

/// Makes the source streamed at a given rate (called once per rate).
using SourceFactory = std::function<std::unique_ptr<SampleSource>(double sample_rate_hz)>;

/// Loopback serve + consume per rate, options.windows windows each.
std::vector<LatencyReport> benchmark_latency(std::span<const double> rates_hz,
                                             const MlpModel& model, const FeatureConfig& features,
                                             const SourceFactory& make_source,
                                             const BenchmarkOptions& options);

std::string format_latency_table(std::span<const LatencyReport> reports);

}  // namespace emsca
