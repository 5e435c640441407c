#ifndef POPCACHE_FEATURE_STORE_HPP
#define POPCACHE_FEATURE_STORE_HPP

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "popcache/trace.hpp"

namespace popcache {

/// Popularity history of one content: the last K-1 finalized epoch
/// popularities (ring buffer) plus the request count of the running epoch.
class ContentFeatures {
 public:
  explicit ContentFeatures(std::size_t history_len) : past_(history_len, 0.0) {}

  /// Oldest first.
  double past(std::size_t age_rank) const { return past_[(head_ + age_rank) % past_.size()]; }
  std::size_t history_len() const { return past_.size(); }

  std::uint64_t current_count() const { return current_count_; }

  bool history_all_zero() const;

 private:
  friend class FeatureDb;

  void push(double popularity);

  std::vector<double> past_;
  std::size_t head_ = 0;  // index of the oldest slot
  std::uint64_t current_count_ = 0;
};

/// Final popularities of a closed epoch. Contents absent from the map had no requests.
class FinalizedEpoch {
 public:
  FinalizedEpoch() = default;
  FinalizedEpoch(std::uint64_t epoch, std::uint64_t requests,
                 std::unordered_map<ContentId, double> popularity)
      : epoch_(epoch), requests_(requests), popularity_(std::move(popularity)) {}

  double popularity(ContentId id) const {
    const auto it = popularity_.find(id);
    return it == popularity_.end() ? 0.0 : it->second;
  }

  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t requests() const { return requests_; }
  const std::unordered_map<ContentId, double>& entries() const { return popularity_; }

 private:
  std::uint64_t epoch_ = 0;
  std::uint64_t requests_ = 0;
  std::unordered_map<ContentId, double> popularity_;
};

/// Feature vectors for every content in the catalogue. Contents that were
/// never requested (or whose whole history decayed to zero) are not stored
/// and read as all-zero.
class FeatureDb {
 public:
  /// `k` is the feature vector length (K >= 1); `epoch_duration` is T.
  FeatureDb(std::size_t k, double epoch_duration);

  /// Counts the request and returns [p_-(K-1), ..., p_-1, p_0].
  /// Throws EpochOrderError when `time` is outside the current epoch.
  std::vector<double> record_request(ContentId id, double time);

  /// Current feature vector without recording a request.
  std::vector<double> features(ContentId id) const;
  void features_into(ContentId id, std::vector<double>& out) const;

  /// Requests for `id` over requests seen so far this epoch; 0 for an empty epoch.
  double current_popularity(ContentId id) const;

  /// Closes the running epoch: pushes each content's final popularity into its
  /// history, resets the counts and advances the epoch index.
  FinalizedEpoch rollover();

  std::size_t k() const { return k_; }
  double epoch_duration() const { return epoch_duration_; }
  std::uint64_t epoch_index() const { return epoch_index_; }
  double epoch_start() const { return static_cast<double>(epoch_index_) * epoch_duration_; }
  std::uint64_t total_current_count() const { return total_current_count_; }
  std::size_t tracked_contents() const { return entries_.size(); }

 private:
  std::size_t k_;
  double epoch_duration_;
  std::uint64_t epoch_index_ = 0;
  std::uint64_t total_current_count_ = 0;
  std::unordered_map<ContentId, ContentFeatures> entries_;
};

}  // namespace popcache

#endif  // POPCACHE_FEATURE_STORE_HPP
