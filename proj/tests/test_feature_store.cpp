#include <doctest.h>

#include <cmath>

#include "popcache/errors.hpp"
#include "popcache/feature_store.hpp"
#include "popcache/rng.hpp"

using namespace popcache;

TEST_CASE("record_request returns history plus current popularity") {
  FeatureDb db(4, 200.0);
  const auto first = db.record_request(7, 0.0);
  CHECK(first == std::vector<double>{0, 0, 0, 1.0});

  FeatureDb db2(4, 200.0);
  db2.record_request(1, 1.0);  // A
  db2.record_request(1, 2.0);  // A
  db2.record_request(2, 3.0);  // B
  const auto b = db2.record_request(2, 4.0);
  CHECK(b[3] == doctest::Approx(0.5));
  CHECK(db2.total_current_count() == 4);
}

TEST_CASE("record_request rejects requests outside the current epoch") {
  FeatureDb db(4, 200.0);
  CHECK_THROWS_AS(db.record_request(1, 200.0), EpochOrderError);
  db.rollover();
  CHECK_THROWS_AS(db.record_request(1, 199.0), EpochOrderError);
  CHECK_NOTHROW(db.record_request(1, 200.0));
}

TEST_CASE("current_popularity") {
  FeatureDb db(4, 200.0);
  CHECK(db.current_popularity(3) == 0.0);  // empty epoch
  for (int i = 0; i < 3; ++i) db.record_request(10, 1.0);
  db.record_request(11, 1.0);
  CHECK(db.current_popularity(10) == doctest::Approx(0.75));
  CHECK(db.current_popularity(99) == 0.0);
}

TEST_CASE("rollover finalizes popularities and shifts histories") {
  FeatureDb db(4, 200.0);
  for (ContentId id : {1, 1, 2, 3}) db.record_request(id, 5.0);
  const auto fin = db.rollover();
  CHECK(fin.popularity(1) == doctest::Approx(0.5));
  CHECK(fin.popularity(2) == doctest::Approx(0.25));
  CHECK(fin.popularity(3) == doctest::Approx(0.25));
  CHECK(fin.popularity(4) == 0.0);
  CHECK(db.epoch_index() == 1);
  CHECK(db.total_current_count() == 0);
  CHECK(db.features(1) == std::vector<double>{0, 0, 0.5, 0});
}

TEST_CASE("ring shift keeps the last K-1 popularities") {
  // Drive content 0 through popularities 0.1, 0.2, 0.3, 0.4 using a filler content.
  FeatureDb db(4, 1.0);
  const double pops[] = {0.1, 0.2, 0.3, 0.4};
  for (int e = 0; e < 4; ++e) {
    const double t = e + 0.5;
    const int hits = static_cast<int>(std::lround(pops[e] * 10));
    for (int i = 0; i < hits; ++i) db.record_request(0, t);
    for (int i = hits; i < 10; ++i) db.record_request(1, t);
    db.rollover();
  }
  const auto f = db.features(0);
  CHECK(f[0] == doctest::Approx(0.2));
  CHECK(f[1] == doctest::Approx(0.3));
  CHECK(f[2] == doctest::Approx(0.4));
  CHECK(f[3] == 0.0);
}

TEST_CASE("empty epoch shifts in zeros and drops all-zero histories") {
  FeatureDb db(3, 1.0);
  db.record_request(5, 0.5);
  db.rollover();
  CHECK(db.features(5) == std::vector<double>{0, 1.0, 0});
  const auto fin = db.rollover();
  CHECK(fin.entries().empty());
  CHECK(fin.requests() == 0);
  CHECK(db.features(5) == std::vector<double>{1.0, 0, 0});
  db.rollover();
  CHECK(db.features(5) == std::vector<double>{0, 0, 0});
  CHECK(db.tracked_contents() == 0);
}

TEST_CASE("K = 1 keeps only the running popularity") {
  FeatureDb db(1, 1.0);
  CHECK(db.record_request(2, 0.1) == std::vector<double>{1.0});
  db.rollover();
  CHECK(db.features(2) == std::vector<double>{0.0});
}

TEST_CASE("popularity mass is conserved (randomized)") {
  Rng rng(17);
  FeatureDb db(4, 10.0);
  double t = 0.0;
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::vector<ContentId> seen;
    for (int i = 0; i < 500; ++i) {
      const ContentId id = rng.below(60);
      db.record_request(id, t);
      seen.push_back(id);
      t += 0.01;
      if (i % 50 == 0) {
        double sum = 0.0;
        for (ContentId c = 0; c < 60; ++c) sum += db.current_popularity(c);
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
    const auto fin = db.rollover();
    double sum = 0.0;
    for (const auto& [id, p] : fin.entries()) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    t = (epoch + 1) * 10.0;
  }
}
