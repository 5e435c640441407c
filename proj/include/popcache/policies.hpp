#ifndef POPCACHE_POLICIES_HPP
#define POPCACHE_POLICIES_HPP

#include <cstddef>
#include <list>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include "popcache/cache_heap.hpp"
#include "popcache/feature_store.hpp"
#include "popcache/predictors.hpp"
#include "popcache/rng.hpp"

namespace popcache {

enum class PolicyKind { Fnn, Lr, Avg, Lru, Arc };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);
/// The predictor behind a popularity policy; nullopt for LRU and ARC.
std::optional<PredictorKind> predictor_of(PolicyKind kind);

enum class AccessOutcome { Hit, MissStored, MissBypassed };

struct AccessResult {
  AccessOutcome outcome;
  std::optional<ContentId> evicted;

  bool hit() const { return outcome == AccessOutcome::Hit; }
};

/// Everything a policy may look at for one request.
struct RequestContext {
  ContentId id;
  double epoch_time;                  // seconds since the current epoch began
  std::span<const double> features;  // freshly updated feature vector
};

class CachePolicy {
 public:
  virtual ~CachePolicy() = default;
  virtual AccessResult on_request(const RequestContext& ctx) = 0;
  virtual std::size_t size() const = 0;
  virtual bool contains(ContentId id) const = 0;
};

class LruCache final : public CachePolicy {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  AccessResult access(ContentId id);
  AccessResult on_request(const RequestContext& ctx) override { return access(ctx.id); }
  std::size_t size() const override { return order_.size(); }
  bool contains(ContentId id) const override { return where_.count(id) != 0; }

  /// Most recent first.
  const std::list<ContentId>& recency() const { return order_; }

 private:
  std::size_t capacity_;
  std::list<ContentId> order_;
  std::unordered_map<ContentId, std::list<ContentId>::iterator> where_;
};

/// Adaptive Replacement Cache: resident lists T1 (seen once recently) and T2
/// (seen at least twice), ghost lists B1/B2 of ids recently evicted from
/// each, and a target size p for T1 adapted on ghost hits.
class ArcCache final : public CachePolicy {
 public:
  explicit ArcCache(std::size_t capacity) : c_(capacity) {}

  AccessResult access(ContentId id);
  AccessResult on_request(const RequestContext& ctx) override { return access(ctx.id); }
  std::size_t size() const override { return t1_.size() + t2_.size(); }
  bool contains(ContentId id) const override;

  std::size_t t1_size() const { return t1_.size(); }
  std::size_t t2_size() const { return t2_.size(); }
  std::size_t b1_size() const { return b1_.size(); }
  std::size_t b2_size() const { return b2_.size(); }
  double target_t1() const { return p_; }
  std::size_t capacity() const { return c_; }

  bool invariants_hold() const;

 private:
  enum class Where { T1, T2, B1, B2 };
  struct Slot {
    Where where;
    std::list<ContentId>::iterator it;
  };

  std::list<ContentId>& list_of(Where w);
  void push_mru(Where w, ContentId id);
  void unlink(ContentId id);
  ContentId pop_lru(Where w);
  /// Moves one resident to its ghost list; returns the evicted id.
  ContentId replace(bool request_in_b2);

  std::size_t c_;
  double p_ = 0.0;
  std::list<ContentId> t1_, t2_, b1_, b2_;  // MRU at front
  std::unordered_map<ContentId, Slot> slots_;
};

/// Keeps the contents with the largest predicted popularity: admission and
/// eviction against the heap minimum, plus random re-evaluation of a few
/// residents on every request.
class PopularityCache final : public CachePolicy {
 public:
  PopularityCache(std::size_t capacity, const Predictor& predictor, const FeatureDb& db,
                  std::size_t refresh_size, std::uint64_t seed);

  AccessResult on_request(const RequestContext& ctx) override;
  std::size_t size() const override { return heap_.size(); }
  bool contains(ContentId id) const override { return heap_.contains(id); }

  const CacheHeap& heap() const { return heap_; }

 private:
  CacheHeap heap_;
  const Predictor& predictor_;
  const FeatureDb& db_;
  std::size_t refresh_size_;
  Rng rng_;
  std::vector<double> scratch_;
};

}  // namespace popcache

#endif  // POPCACHE_POLICIES_HPP
