#include "popcache/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

#include "popcache/errors.hpp"

namespace popcache {

namespace {

std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  cdf.back() = 1.0;
  return cdf;
}

std::size_t sample_rank(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (catalogue_size < 2) throw std::invalid_argument("catalogue_size must be >= 2");
  if (!(class_split > 0.0 && class_split < 1.0))
    throw std::invalid_argument("class_split must lie in (0, 1)");
  if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate))
    throw std::invalid_argument("arrival_rate must be > 0");
  if (!(zipf_exponent >= 0.0) || !std::isfinite(zipf_exponent))
    throw std::invalid_argument("zipf_exponent must be >= 0");
  if (!(duration >= 0.0) || !std::isfinite(duration))
    throw std::invalid_argument("duration must be >= 0");
  if (!(epoch_duration > 0.0) || !std::isfinite(epoch_duration))
    throw std::invalid_argument("epoch_duration must be > 0");
}

std::size_t SyntheticConfig::first_class_size() const {
  const auto n = static_cast<double>(catalogue_size);
  const auto first = static_cast<std::size_t>(std::llround(class_split * n));
  return std::clamp<std::size_t>(first, 1, catalogue_size - 1);
}

std::vector<double> zipf_weights(std::size_t n, double exponent) {
  if (n == 0) throw std::invalid_argument("zipf_weights: n must be >= 1");
  if (!(exponent >= 0.0)) throw std::invalid_argument("zipf_weights: exponent must be >= 0");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(static_cast<double>(i + 1), -exponent);
  // Sum smallest-first to keep the normalization error small.
  double total = 0.0;
  for (auto it = w.rbegin(); it != w.rend(); ++it) total += *it;
  for (auto& x : w) x /= total;
  return w;
}

std::uint64_t epoch_of(double time, double epoch_duration) {
  if (!(epoch_duration > 0.0)) throw std::invalid_argument("epoch_of: epoch duration must be > 0");
  if (!(time >= 0.0)) throw std::invalid_argument("epoch_of: time must be >= 0");
  return static_cast<std::uint64_t>(std::floor(time / epoch_duration));
}

SyntheticTrace::SyntheticTrace(const SyntheticConfig& cfg)
    : cfg_(cfg),
      first_size_(0),
      arrivals_(derive_seed(cfg.seed, "synthetic/arrivals")),
      contents_(derive_seed(cfg.seed, "synthetic/contents")),
      permutations_(derive_seed(cfg.seed, "synthetic/permutations")) {
  cfg_.validate();
  first_size_ = cfg_.first_class_size();
  first_cdf_ = cumulative(zipf_weights(first_size_, cfg_.zipf_exponent));
  const std::size_t second_size = cfg_.catalogue_size - first_size_;
  second_cdf_ = cumulative(zipf_weights(second_size, cfg_.zipf_exponent));
  second_assignment_.resize(second_size);
  std::iota(second_assignment_.begin(), second_assignment_.end(), static_cast<ContentId>(first_size_));
  permutations_.shuffle(std::span<ContentId>(second_assignment_));
}

void SyntheticTrace::advance_epoch(std::uint64_t epoch) {
  for (; epoch_ < epoch; ++epoch_) permutations_.shuffle(std::span<ContentId>(second_assignment_));
}

ContentId SyntheticTrace::draw_content() {
  const bool first_class = contents_.uniform01() < 0.5;
  const double u = contents_.uniform01();
  if (first_class) return static_cast<ContentId>(sample_rank(first_cdf_, u));
  return second_assignment_[sample_rank(second_cdf_, u)];
}

std::optional<RequestEvent> SyntheticTrace::next() {
  clock_ += arrivals_.exponential(cfg_.arrival_rate);
  if (clock_ >= cfg_.duration) {
    clock_ = cfg_.duration;
    return std::nullopt;
  }
  advance_epoch(epoch_of(clock_, cfg_.epoch_duration));
  return RequestEvent{clock_, draw_content()};
}

std::optional<RequestEvent> TraceReader::next() {
  std::string line;
  if (!std::getline(in_, line)) return std::nullopt;
  ++line_no_;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::string_view text(line);
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) throw TraceParseError("expected '<time>,<content_id>'", line_no_);

  const std::string_view time_field = text.substr(0, comma);
  const std::string_view id_field = text.substr(comma + 1);

  RequestEvent ev;
  auto [tp, tec] = std::from_chars(time_field.data(), time_field.data() + time_field.size(), ev.time);
  if (tec != std::errc{} || tp != time_field.data() + time_field.size() || !std::isfinite(ev.time) ||
      ev.time < 0.0)
    throw TraceParseError("invalid time field '" + std::string(time_field) + "'", line_no_);

  auto [ip, iec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), ev.content_id);
  if (iec != std::errc{} || ip != id_field.data() + id_field.size() || id_field.empty())
    throw TraceParseError("invalid content id '" + std::string(id_field) + "'", line_no_);

  if (ev.time < last_time_) throw TraceOrderError("time goes backwards", line_no_);
  last_time_ = ev.time;
  return ev;
}

void write_event(std::ostream& out, const RequestEvent& ev) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), ev.time);
  (void)ec;
  out.write(buf, end - buf);
  out.put(',');
  auto [end2, ec2] = std::to_chars(buf, buf + sizeof(buf), ev.content_id);
  (void)ec2;
  out.write(buf, end2 - buf);
  out.put('\n');
}

std::size_t write_trace(std::ostream& out, EventSource& source) {
  std::size_t n = 0;
  while (auto ev = source.next()) {
    write_event(out, *ev);
    ++n;
  }
  return n;
}

std::vector<RequestEvent> drain(EventSource& source) {
  std::vector<RequestEvent> events;
  while (auto ev = source.next()) events.push_back(*ev);
  return events;
}

}  // namespace popcache
