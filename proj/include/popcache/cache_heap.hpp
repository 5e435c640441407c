#ifndef POPCACHE_CACHE_HEAP_HPP
#define POPCACHE_CACHE_HEAP_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "popcache/rng.hpp"
#include "popcache/trace.hpp"

namespace popcache {

/// Bounded binary min-heap of (content, estimated popularity) with a position
/// index, so resident keys can be changed in O(log n).
///
/// Ties between equal keys are broken by heap position: arbitrary, but fully
/// determined by the operation sequence.
class CacheHeap {
 public:
  struct Entry {
    ContentId id;
    double key;
  };

  enum class Action { Updated, Inserted, Replaced, Bypassed };

  struct Outcome {
    Action action;
    std::optional<ContentId> evicted;
  };

  explicit CacheHeap(std::size_t capacity) : capacity_(capacity) { heap_.reserve(capacity); }

  /// Resident: key updated in place. Otherwise inserted if there is room, or
  /// if `key` beats the minimum (which is evicted); else bypassed.
  /// Throws std::invalid_argument unless key lies in [0, 1].
  Outcome update_or_insert(ContentId id, double key);

  /// Re-keys min(sample_size, size()) distinct residents chosen uniformly.
  void refresh(std::size_t sample_size, const std::function<double(ContentId)>& reevaluate, Rng& rng);

  bool contains(ContentId id) const { return index_.count(id) != 0; }
  std::optional<double> key_of(ContentId id) const;
  std::size_t size() const { return heap_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return heap_.empty(); }

  /// Requires !empty().
  const Entry& min() const { return heap_.front(); }
  Entry pop_min();
  bool erase(ContentId id);

  std::span<const Entry> entries() const { return heap_; }

  /// Heap order, index/array agreement, uniqueness and the capacity bound.
  bool invariants_hold() const;

 private:
  void set_key_at(std::size_t pos, double key);
  void place(std::size_t pos, Entry e);
  void sift_up(std::size_t pos);
  void sift_down(std::size_t pos);
  void remove_at(std::size_t pos);

  std::size_t capacity_;
  std::vector<Entry> heap_;
  std::unordered_map<ContentId, std::size_t> index_;
};

}  // namespace popcache

#endif  // POPCACHE_CACHE_HEAP_HPP
