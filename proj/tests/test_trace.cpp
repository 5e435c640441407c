#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "popcache/errors.hpp"
#include "popcache/trace.hpp"

using namespace popcache;

namespace {

// Wilson-Hilferty approximation of the chi-square quantile at z standard deviations.
double chi_square_quantile(double df, double z) {
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

constexpr double kZ99 = 2.3263478740408408;

}  // namespace

TEST_CASE("zipf_weights examples") {
  CHECK(zipf_weights(1, 0.8) == std::vector<double>{1.0});

  const auto uniform = zipf_weights(3, 0.0);
  for (double w : uniform) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // 1 / (1 + 2^-0.8) = 1 / 1.574349... by hand.
  const auto two = zipf_weights(2, 0.8);
  CHECK(std::abs(two[0] - 0.6352) < 1e-4);
  CHECK(std::abs(two[1] - 0.3648) < 1e-4);

  CHECK_THROWS_AS(zipf_weights(0, 0.8), std::invalid_argument);
}

TEST_CASE("zipf_weights are strictly decreasing and normalized") {
  for (std::size_t n : {2u, 17u, 1000u, 10000u}) {
    for (double s : {0.1, 0.8, 1.0, 2.5}) {
      const auto w = zipf_weights(n, s);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        total += w[i];
        if (i > 0) CHECK(w[i] < w[i - 1]);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("epoch_of uses half-open epochs") {
  CHECK(epoch_of(0.0, 200.0) == 0);
  CHECK(epoch_of(199.999, 200.0) == 0);
  CHECK(epoch_of(400.0, 200.0) == 2);
  CHECK_THROWS_AS(epoch_of(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(epoch_of(1.0, -5.0), std::invalid_argument);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  // Default rate and epoch length give about 2e5 requests per epoch.
  CHECK(cfg.arrival_rate * cfg.epoch_duration == doctest::Approx(2e5));

  auto bad = cfg;
  bad.catalogue_size = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.class_split = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.arrival_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.zipf_exponent = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("two-content catalogue puts half the mass on each class") {
  SyntheticConfig cfg;
  cfg.catalogue_size = 2;
  cfg.arrival_rate = 100.0;
  cfg.epoch_duration = 200.0;
  cfg.duration = 200.0;
  SyntheticTrace trace(cfg);
  const auto events = drain(trace);
  REQUIRE(events.size() > 10000);
  std::size_t zeros = 0;
  for (const auto& ev : events) {
    CHECK(ev.content_id <= 1);
    zeros += ev.content_id == 0;
  }
  const double n = static_cast<double>(events.size());
  CHECK(std::abs(zeros / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("synthetic streams are time-ordered and reproducible") {
  SyntheticConfig cfg;
  cfg.catalogue_size = 100;
  cfg.arrival_rate = 50.0;
  cfg.epoch_duration = 10.0;
  cfg.duration = 100.0;
  cfg.seed = 42;

  SyntheticTrace a(cfg), b(cfg);
  std::ostringstream sa, sb;
  write_trace(sa, a);
  write_trace(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(!sa.str().empty());

  cfg.seed = 43;
  SyntheticTrace c(cfg);
  std::ostringstream sc;
  write_trace(sc, c);
  CHECK(sa.str() != sc.str());

  SyntheticTrace d(cfg);
  const auto events = drain(d);
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i - 1].time <= events[i].time);
  CHECK(events.back().time < cfg.duration);
}

TEST_CASE("rank-1 first-class frequency matches its Zipf weight") {
  SyntheticConfig cfg;  // paper defaults: 10^4 contents, Zipf 0.8, 1000 req/s
  cfg.duration = 10 * cfg.epoch_duration;
  SyntheticTrace trace(cfg);
  std::size_t first_class = 0, rank1 = 0;
  const std::size_t split = cfg.first_class_size();
  while (auto ev = trace.next()) {
    if (ev->content_id < split) {
      ++first_class;
      rank1 += ev->content_id == 0;
    }
  }
  const double expected = zipf_weights(5000, 0.8)[0];
  const double n = static_cast<double>(first_class);
  const double se = std::sqrt(expected * (1.0 - expected) / n);
  CHECK(std::abs(rank1 / n - expected) < 3.0 * se);
}

TEST_CASE("first-class requests follow the fixed Zipf weights (chi-square, 99%)") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticConfig cfg;
    cfg.catalogue_size = 200;
    cfg.arrival_rate = 1000.0;
    cfg.duration = 250.0;
    cfg.seed = seed;
    SyntheticTrace trace(cfg);
    const std::size_t split = cfg.first_class_size();
    std::vector<double> counts(split, 0.0);
    while (auto ev = trace.next())
      if (ev->content_id < split) counts[ev->content_id] += 1.0;
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    REQUIRE(n >= 1e5);
    const auto w = zipf_weights(split, cfg.zipf_exponent);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < split; ++i) {
      const double e = n * w[i];
      chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    CHECK(chi2 < chi_square_quantile(static_cast<double>(split - 1), kZ99));
  }
}

TEST_CASE("only second-class ids change popularity across epochs") {
  SyntheticConfig cfg;
  cfg.catalogue_size = 200;
  cfg.arrival_rate = 1000.0;
  cfg.epoch_duration = 100.0;
  cfg.duration = 200.0;
  cfg.seed = 9;
  SyntheticTrace trace(cfg);
  const std::size_t split = cfg.first_class_size();
  std::vector<std::vector<double>> counts(2, std::vector<double>(cfg.catalogue_size, 0.0));
  while (auto ev = trace.next()) counts[epoch_of(ev->time, cfg.epoch_duration)][ev->content_id] += 1.0;

  // Two-sample chi-square homogeneity statistic over a range of ids.
  auto homogeneity = [&](std::size_t lo, std::size_t hi) {
    double n0 = 0, n1 = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      n0 += counts[0][i];
      n1 += counts[1][i];
    }
    double stat = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double tot = counts[0][i] + counts[1][i];
      if (tot == 0) continue;
      const double e0 = tot * n0 / (n0 + n1), e1 = tot * n1 / (n0 + n1);
      stat += (counts[0][i] - e0) * (counts[0][i] - e0) / e0 + (counts[1][i] - e1) * (counts[1][i] - e1) / e1;
    }
    return stat;
  };
  const double df_first = static_cast<double>(split - 1);
  const double df_second = static_cast<double>(cfg.catalogue_size - split - 1);
  CHECK(homogeneity(0, split) < chi_square_quantile(df_first, kZ99));
  CHECK(homogeneity(split, cfg.catalogue_size) > chi_square_quantile(df_second, kZ99));
}

TEST_CASE("event count over a duration is Poisson") {
  const double rate = 100.0, duration = 100.0;
  double total = 0.0;
  const int traces = 30;
  for (int s = 0; s < traces; ++s) {
    SyntheticConfig cfg;
    cfg.catalogue_size = 10;
    cfg.arrival_rate = rate;
    cfg.duration = duration;
    cfg.seed = 1000 + static_cast<std::uint64_t>(s);
    SyntheticTrace trace(cfg);
    total += static_cast<double>(drain(trace).size());
  }
  const double lambda = rate * duration;
  CHECK(std::abs(total / traces - lambda) < 3.0 * std::sqrt(lambda / traces));
}

TEST_CASE("read_trace parses and validates") {
  {
    std::istringstream in("0.0,5\n1.5,7\n");
    TraceReader reader(in);
    const auto events = drain(reader);
    CHECK(events == std::vector<RequestEvent>{{0.0, 5}, {1.5, 7}});
  }
  {
    std::istringstream in("1.0,3\n0.5,3\n");
    TraceReader reader(in);
    CHECK(reader.next().has_value());
    try {
      reader.next();
      FAIL("expected an ordering error");
    } catch (const TraceOrderError& e) {
      CHECK(e.line() == 2);
    }
  }
  {
    std::istringstream in("abc,3\n");
    TraceReader reader(in);
    try {
      reader.next();
      FAIL("expected a parse error");
    } catch (const TraceParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  for (const char* bad : {"1.0\n", "1.0,\n", ",4\n", "1.0,-3\n", "1.0,4x\n", "-1,4\n", "nan,4\n"}) {
    std::istringstream in(bad);
    TraceReader reader(in);
    CHECK_THROWS_AS(reader.next(), TraceParseError);
  }
}

TEST_CASE("written traces read back bit-identically") {
  SyntheticConfig cfg;
  cfg.catalogue_size = 1000;
  cfg.arrival_rate = 333.3;
  cfg.duration = 30.0;
  cfg.epoch_duration = 7.0;
  SyntheticTrace trace(cfg);
  const auto events = drain(trace);
  std::stringstream buf;
  for (const auto& ev : events) write_event(buf, ev);
  TraceReader reader(buf);
  CHECK(drain(reader) == events);
}
