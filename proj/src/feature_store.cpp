#include "popcache/feature_store.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "popcache/errors.hpp"

namespace popcache {

bool ContentFeatures::history_all_zero() const {
  return std::all_of(past_.begin(), past_.end(), [](double p) { return p == 0.0; });
}

void ContentFeatures::push(double popularity) {
  if (past_.empty()) return;
  past_[head_] = popularity;
  head_ = (head_ + 1) % past_.size();
}

FeatureDb::FeatureDb(std::size_t k, double epoch_duration) : k_(k), epoch_duration_(epoch_duration) {
  if (k_ == 0) throw std::invalid_argument("FeatureDb: K must be >= 1");
  if (!(epoch_duration_ > 0.0)) throw std::invalid_argument("FeatureDb: epoch duration must be > 0");
}

std::vector<double> FeatureDb::record_request(ContentId id, double time) {
  const auto epoch = epoch_of(time, epoch_duration_);
  if (epoch < epoch_index_)
    throw EpochOrderError("request at t=" + std::to_string(time) + " belongs to past epoch " +
                          std::to_string(epoch));
  if (epoch > epoch_index_)
    throw EpochOrderError("request at t=" + std::to_string(time) + " belongs to future epoch " +
                          std::to_string(epoch) + "; roll over first");

  auto it = entries_.try_emplace(id, k_ - 1).first;
  ++it->second.current_count_;
  ++total_current_count_;

  std::vector<double> out;
  features_into(id, out);
  return out;
}

std::vector<double> FeatureDb::features(ContentId id) const {
  std::vector<double> out;
  features_into(id, out);
  return out;
}

void FeatureDb::features_into(ContentId id, std::vector<double>& out) const {
  out.assign(k_, 0.0);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return;
  const ContentFeatures& f = it->second;
  for (std::size_t i = 0; i + 1 < k_; ++i) out[i] = f.past(i);
  out[k_ - 1] = current_popularity(id);
}

double FeatureDb::current_popularity(ContentId id) const {
  if (total_current_count_ == 0) return 0.0;
  const auto it = entries_.find(id);
  if (it == entries_.end()) return 0.0;
  return static_cast<double>(it->second.current_count_) / static_cast<double>(total_current_count_);
}

FinalizedEpoch FeatureDb::rollover() {
  std::unordered_map<ContentId, double> finalized;
  const auto total = static_cast<double>(total_current_count_);
  for (auto it = entries_.begin(); it != entries_.end();) {
    ContentFeatures& f = it->second;
    const double p = f.current_count_ > 0 ? static_cast<double>(f.current_count_) / total : 0.0;
    if (f.current_count_ > 0) finalized.emplace(it->first, p);
    f.push(p);
    f.current_count_ = 0;
    if (f.history_all_zero())
      it = entries_.erase(it);
    else
      ++it;
  }
  FinalizedEpoch out(epoch_index_, total_current_count_, std::move(finalized));
  total_current_count_ = 0;
  ++epoch_index_;
  return out;
}

}  // namespace popcache
