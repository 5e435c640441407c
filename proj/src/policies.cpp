#include "popcache/policies.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <unordered_set>

namespace popcache {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Fnn: return "fnn";
    case PolicyKind::Lr: return "lr";
    case PolicyKind::Avg: return "avg";
    case PolicyKind::Lru: return "lru";
    case PolicyKind::Arc: return "arc";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "fnn") return PolicyKind::Fnn;
  if (name == "lr") return PolicyKind::Lr;
  if (name == "avg") return PolicyKind::Avg;
  if (name == "lru") return PolicyKind::Lru;
  if (name == "arc") return PolicyKind::Arc;
  throw std::invalid_argument("unknown policy '" + name + "' (expected fnn, lr, avg, lru or arc)");
}

std::optional<PredictorKind> predictor_of(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Fnn: return PredictorKind::Fnn;
    case PolicyKind::Lr: return PredictorKind::Lr;
    case PolicyKind::Avg: return PredictorKind::Avg;
    default: return std::nullopt;
  }
}

// LRU

AccessResult LruCache::access(ContentId id) {
  if (const auto it = where_.find(id); it != where_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    return {AccessOutcome::Hit, std::nullopt};
  }
  if (capacity_ == 0) return {AccessOutcome::MissBypassed, std::nullopt};
  std::optional<ContentId> evicted;
  if (order_.size() == capacity_) {
    evicted = order_.back();
    where_.erase(order_.back());
    order_.pop_back();
  }
  order_.push_front(id);
  where_[id] = order_.begin();
  return {AccessOutcome::MissStored, evicted};
}

// ARC

std::list<ContentId>& ArcCache::list_of(Where w) {
  switch (w) {
    case Where::T1: return t1_;
    case Where::T2: return t2_;
    case Where::B1: return b1_;
    case Where::B2: return b2_;
  }
  return t1_;
}

bool ArcCache::contains(ContentId id) const {
  const auto it = slots_.find(id);
  return it != slots_.end() && (it->second.where == Where::T1 || it->second.where == Where::T2);
}

void ArcCache::push_mru(Where w, ContentId id) {
  auto& l = list_of(w);
  l.push_front(id);
  slots_[id] = Slot{w, l.begin()};
}

void ArcCache::unlink(ContentId id) {
  const auto it = slots_.find(id);
  list_of(it->second.where).erase(it->second.it);
  slots_.erase(it);
}

ContentId ArcCache::pop_lru(Where w) {
  auto& l = list_of(w);
  const ContentId id = l.back();
  l.pop_back();
  slots_.erase(id);
  return id;
}

ContentId ArcCache::replace(bool request_in_b2) {
  const auto t1 = static_cast<double>(t1_.size());
  const bool from_t1 = !t1_.empty() && (t1 > p_ || (request_in_b2 && t1 == p_));
  if (from_t1 || t2_.empty()) {
    const ContentId victim = pop_lru(Where::T1);
    push_mru(Where::B1, victim);
    return victim;
  }
  const ContentId victim = pop_lru(Where::T2);
  push_mru(Where::B2, victim);
  return victim;
}

AccessResult ArcCache::access(ContentId id) {
  if (c_ == 0) return {AccessOutcome::MissBypassed, std::nullopt};
  const auto c = static_cast<double>(c_);
  const auto found = slots_.find(id);

  if (found != slots_.end()) {
    const Where w = found->second.where;
    const auto b1 = static_cast<double>(b1_.size());
    const auto b2 = static_cast<double>(b2_.size());
    switch (w) {
      case Where::T1:
      case Where::T2:
        unlink(id);
        push_mru(Where::T2, id);
        return {AccessOutcome::Hit, std::nullopt};
      case Where::B1: {
        p_ = std::min(c, p_ + std::max(1.0, b2 / b1));
        const ContentId victim = replace(false);
        unlink(id);
        push_mru(Where::T2, id);
        return {AccessOutcome::MissStored, victim};
      }
      case Where::B2: {
        p_ = std::max(0.0, p_ - std::max(1.0, b1 / b2));
        const ContentId victim = replace(true);
        unlink(id);
        push_mru(Where::T2, id);
        return {AccessOutcome::MissStored, victim};
      }
    }
  }

  // Not in any list.
  std::optional<ContentId> evicted;
  const std::size_t l1 = t1_.size() + b1_.size();
  const std::size_t total = l1 + t2_.size() + b2_.size();
  if (l1 == c_) {
    if (t1_.size() < c_) {
      pop_lru(Where::B1);
      evicted = replace(false);
    } else {
      evicted = pop_lru(Where::T1);
    }
  } else if (total >= c_) {
    if (total == 2 * c_) pop_lru(Where::B2);
    evicted = replace(false);
  }
  push_mru(Where::T1, id);
  return {AccessOutcome::MissStored, evicted};
}

bool ArcCache::invariants_hold() const {
  const std::size_t t1 = t1_.size(), t2 = t2_.size(), b1 = b1_.size(), b2 = b2_.size();
  if (t1 + t2 > c_ || t1 + b1 > c_ || t1 + t2 + b1 + b2 > 2 * c_) return false;
  if (p_ < 0.0 || p_ > static_cast<double>(c_)) return false;
  if (slots_.size() != t1 + t2 + b1 + b2) return false;
  std::unordered_set<ContentId> seen;
  for (const auto* l : {&t1_, &t2_, &b1_, &b2_})
    for (const ContentId id : *l)
      if (!seen.insert(id).second) return false;
  return true;
}

// Popularity-driven heap policy

PopularityCache::PopularityCache(std::size_t capacity, const Predictor& predictor, const FeatureDb& db,
                                 std::size_t refresh_size, std::uint64_t seed)
    : heap_(capacity), predictor_(predictor), db_(db), refresh_size_(refresh_size), rng_(seed) {}

AccessResult PopularityCache::on_request(const RequestContext& ctx) {
  if (heap_.capacity() == 0) return {AccessOutcome::MissBypassed, std::nullopt};

  const double estimate = predictor_.predict(ctx.id, ctx.features, ctx.epoch_time);
  const CacheHeap::Outcome out = heap_.update_or_insert(ctx.id, estimate);

  heap_.refresh(
      refresh_size_,
      [&](ContentId id) {
        db_.features_into(id, scratch_);
        return predictor_.predict(id, scratch_, ctx.epoch_time);
      },
      rng_);

  switch (out.action) {
    case CacheHeap::Action::Updated: return {AccessOutcome::Hit, std::nullopt};
    case CacheHeap::Action::Inserted: return {AccessOutcome::MissStored, std::nullopt};
    case CacheHeap::Action::Replaced: return {AccessOutcome::MissStored, out.evicted};
    case CacheHeap::Action::Bypassed: return {AccessOutcome::MissBypassed, std::nullopt};
  }
  return {AccessOutcome::MissBypassed, std::nullopt};
}

}  // namespace popcache
