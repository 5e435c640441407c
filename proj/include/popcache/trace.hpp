#ifndef POPCACHE_TRACE_HPP
#define POPCACHE_TRACE_HPP

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "popcache/rng.hpp"

namespace popcache {

using ContentId = std::uint64_t;

/// One content request. Times are seconds since trace start.
struct RequestEvent {
  double time = 0.0;
  ContentId content_id = 0;

  friend bool operator==(const RequestEvent&, const RequestEvent&) = default;
};

/// Two-class synthetic workload. Each class carries half of the request mass
/// with Zipf weights inside the class; the second class has its rank-to-id
/// assignment re-drawn at every epoch boundary.
struct SyntheticConfig {
  std::size_t catalogue_size = 10000;
  double zipf_exponent = 0.8;
  double arrival_rate = 1000.0;  // requests per second
  double duration = 2000.0;      // seconds
  double epoch_duration = 200.0;
  double class_split = 0.5;  // fraction of the catalogue in the first class
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on an out-of-range field.
  void validate() const;

  std::size_t first_class_size() const;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

/// Normalized Zipf weights for ranks 1..n. Throws std::invalid_argument when n == 0.
std::vector<double> zipf_weights(std::size_t n, double exponent);

/// Index of the half-open epoch [l*T, (l+1)*T) containing `time`.
std::uint64_t epoch_of(double time, double epoch_duration);

/// Single-consumer stream of time-ordered requests.
class EventSource {
 public:
  virtual ~EventSource() = default;
  virtual std::optional<RequestEvent> next() = 0;
};

class SyntheticTrace final : public EventSource {
 public:
  explicit SyntheticTrace(const SyntheticConfig& cfg);

  std::optional<RequestEvent> next() override;

  const SyntheticConfig& config() const { return cfg_; }

 private:
  ContentId draw_content();
  void advance_epoch(std::uint64_t epoch);

  SyntheticConfig cfg_;
  std::size_t first_size_;
  std::vector<double> first_cdf_;
  std::vector<double> second_cdf_;
  std::vector<ContentId> second_assignment_;  // rank -> content id
  Rng arrivals_;
  Rng contents_;
  Rng permutations_;
  double clock_ = 0.0;
  std::uint64_t epoch_ = 0;
};

/// Reads `time,content_id` lines. Throws TraceParseError on a malformed line
/// and TraceOrderError when time goes backwards.
class TraceReader final : public EventSource {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}

  std::optional<RequestEvent> next() override;

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
  double last_time_ = 0.0;
};

/// Writes events as `time,content_id` lines; times use the shortest
/// representation that parses back to the identical double.
void write_event(std::ostream& out, const RequestEvent& ev);
std::size_t write_trace(std::ostream& out, EventSource& source);

std::vector<RequestEvent> drain(EventSource& source);

}  // namespace popcache

#endif  // POPCACHE_TRACE_HPP
