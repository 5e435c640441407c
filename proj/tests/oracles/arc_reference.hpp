#ifndef POPCACHE_TESTS_ARC_REFERENCE_HPP
#define POPCACHE_TESTS_ARC_REFERENCE_HPP

// Line-by-line transcription of ARC(c) from Megiddo & Modha (FAST 2003),
// using plain vectors (index 0 = LRU end) and linear membership tests.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

class ReferenceArc {
 public:
  explicit ReferenceArc(std::size_t c) : c_(static_cast<double>(c)) {}

  // Returns true on a cache hit.
  bool request(std::uint64_t x) {
    // Case I
    if (in(T1, x) || in(T2, x)) {
      remove(T1, x);
      remove(T2, x);
      T2.push_back(x);
      return true;
    }
    // Case II
    if (in(B1, x)) {
      const double d1 = B1.size() >= B2.size() ? 1.0 : double(B2.size()) / double(B1.size());
      p = std::min(p + d1, c_);
      REPLACE(x);
      remove(B1, x);
      T2.push_back(x);
      return false;
    }
    // Case III
    if (in(B2, x)) {
      const double d2 = B2.size() >= B1.size() ? 1.0 : double(B1.size()) / double(B2.size());
      p = std::max(p - d2, 0.0);
      REPLACE(x);
      remove(B2, x);
      T2.push_back(x);
      return false;
    }
    // Case IV
    const double L1 = double(T1.size() + B1.size());
    const double L2 = double(T2.size() + B2.size());
    if (L1 == c_) {
      if (double(T1.size()) < c_) {
        B1.erase(B1.begin());
        REPLACE(x);
      } else {
        T1.erase(T1.begin());
      }
    } else if (L1 < c_ && L1 + L2 >= c_) {
      if (L1 + L2 == 2 * c_) B2.erase(B2.begin());
      REPLACE(x);
    }
    T1.push_back(x);
    return false;
  }

  std::size_t t1() const { return T1.size(); }
  std::size_t t2() const { return T2.size(); }
  std::size_t b1() const { return B1.size(); }
  std::size_t b2() const { return B2.size(); }
  double target() const { return p; }

 private:
  void REPLACE(std::uint64_t x) {
    const double t1 = double(T1.size());
    if (!T1.empty() && ((in(B2, x) && t1 == p) || t1 > p)) {
      B1.push_back(T1.front());
      T1.erase(T1.begin());
    } else {
      B2.push_back(T2.front());
      T2.erase(T2.begin());
    }
  }

  static bool in(const std::vector<std::uint64_t>& v, std::uint64_t x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  }
  static void remove(std::vector<std::uint64_t>& v, std::uint64_t x) {
    v.erase(std::remove(v.begin(), v.end(), x), v.end());
  }

  double c_;
  double p = 0.0;
  std::vector<std::uint64_t> T1, T2, B1, B2;
};

}  // namespace oracle

#endif
