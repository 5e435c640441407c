#include "popcache/cache_heap.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace popcache {

namespace {

void check_key(double key) {
  if (!(key >= 0.0 && key <= 1.0)) throw std::invalid_argument("CacheHeap: key must lie in [0, 1]");
}

}  // namespace

std::optional<double> CacheHeap::key_of(ContentId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return heap_[it->second].key;
}

void CacheHeap::place(std::size_t pos, Entry e) {
  index_[e.id] = pos;
  heap_[pos] = e;
}

void CacheHeap::sift_up(std::size_t pos) {
  Entry e = heap_[pos];
  while (pos > 0) {
    const std::size_t parent = (pos - 1) / 2;
    if (!(e.key < heap_[parent].key)) break;
    place(pos, heap_[parent]);
    pos = parent;
  }
  place(pos, e);
}

void CacheHeap::sift_down(std::size_t pos) {
  Entry e = heap_[pos];
  const std::size_t n = heap_.size();
  for (;;) {
    std::size_t child = 2 * pos + 1;
    if (child >= n) break;
    if (child + 1 < n && heap_[child + 1].key < heap_[child].key) ++child;
    if (!(heap_[child].key < e.key)) break;
    place(pos, heap_[child]);
    pos = child;
  }
  place(pos, e);
}

void CacheHeap::set_key_at(std::size_t pos, double key) {
  const double old = heap_[pos].key;
  heap_[pos].key = key;
  if (key < old)
    sift_up(pos);
  else if (key > old)
    sift_down(pos);
}

void CacheHeap::remove_at(std::size_t pos) {
  index_.erase(heap_[pos].id);
  const std::size_t last = heap_.size() - 1;
  if (pos != last) {
    const Entry moved = heap_[last];
    heap_.pop_back();
    place(pos, moved);
    sift_up(pos);
    sift_down(index_.at(moved.id));
  } else {
    heap_.pop_back();
  }
}

CacheHeap::Outcome CacheHeap::update_or_insert(ContentId id, double key) {
  check_key(key);
  if (const auto it = index_.find(id); it != index_.end()) {
    set_key_at(it->second, key);
    return {Action::Updated, std::nullopt};
  }
  if (capacity_ == 0) return {Action::Bypassed, std::nullopt};
  if (heap_.size() < capacity_) {
    heap_.push_back({id, key});
    index_[id] = heap_.size() - 1;
    sift_up(heap_.size() - 1);
    return {Action::Inserted, std::nullopt};
  }
  if (key > heap_.front().key) {
    const ContentId victim = heap_.front().id;
    index_.erase(victim);
    place(0, {id, key});
    sift_down(0);
    return {Action::Replaced, victim};
  }
  return {Action::Bypassed, std::nullopt};
}

void CacheHeap::refresh(std::size_t sample_size, const std::function<double(ContentId)>& reevaluate, Rng& rng) {
  const std::size_t n = heap_.size();
  const std::size_t r = std::min(sample_size, n);
  if (r == 0) return;

  // Floyd's algorithm: r distinct positions, each subset equally likely.
  std::vector<std::size_t> picked;
  picked.reserve(r);
  for (std::size_t j = n - r; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(picked.begin(), picked.end(), t) == picked.end())
      picked.push_back(t);
    else
      picked.push_back(j);
  }
  // Positions shift while re-keying, so resolve them to ids first.
  std::vector<ContentId> ids;
  ids.reserve(r);
  for (const std::size_t pos : picked) ids.push_back(heap_[pos].id);
  for (const ContentId id : ids) {
    const double key = reevaluate(id);
    check_key(key);
    set_key_at(index_.at(id), key);
  }
}

CacheHeap::Entry CacheHeap::pop_min() {
  if (heap_.empty()) throw std::out_of_range("CacheHeap::pop_min on empty heap");
  const Entry top = heap_.front();
  remove_at(0);
  return top;
}

bool CacheHeap::erase(ContentId id) {
  const auto it = index_.find(id);
  if (it == index_.end()) return false;
  remove_at(it->second);
  return true;
}

bool CacheHeap::invariants_hold() const {
  if (heap_.size() > capacity_ || index_.size() != heap_.size()) return false;
  std::unordered_set<ContentId> seen;
  for (std::size_t i = 0; i < heap_.size(); ++i) {
    if (!seen.insert(heap_[i].id).second) return false;
    const auto it = index_.find(heap_[i].id);
    if (it == index_.end() || it->second != i) return false;
    if (i > 0 && heap_[(i - 1) / 2].key > heap_[i].key) return false;
  }
  return true;
}

}  // namespace popcache
