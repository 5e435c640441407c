#include <doctest.h>

#include <cmath>

#include "popcache/errors.hpp"
#include "popcache/predictors.hpp"

using namespace popcache;

namespace {

constexpr double kC = 1e-15;
// -ln(1e-15) = 15 ln 10
constexpr double kF0 = 34.538776394910684;

// Records every train_batch call.
class RecordingPredictor final : public Predictor {
 public:
  using Predictor::Predictor;
  std::string name() const override { return "recording"; }
  double transformed_output(std::span<const double>) const override { return 0.0; }
  bool trainable() const override { return true; }
  double train_batch(const EpochDataset& data, std::span<const std::size_t> rows, double lr) override {
    calls.push_back({data.epoch(), rows.size(), lr});
    return 1.0;
  }
  struct Call {
    std::uint64_t epoch;
    std::size_t rows;
    double lr;
  };
  std::vector<Call> calls;
};

EpochDataset make_dataset(std::uint64_t epoch, std::size_t n, std::size_t k, double seed_value) {
  EpochDataset d(epoch, k + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> input(k + 1);
    input[0] = static_cast<double>(i % 10) / 10.0;
    for (std::size_t j = 1; j <= k; ++j) input[j] = seed_value + static_cast<double>((i * 7 + j) % 13);
    d.add(input, seed_value + static_cast<double>(i % 5));
  }
  return d;
}

}  // namespace

TEST_CASE("transform examples") {
  CHECK(std::abs(transform(0.0, kC) - 34.5388) < 1e-3);
  CHECK(std::abs(transform(1.0 - kC, kC)) < 1e-15);
  CHECK(std::abs(inverse_transform(transform(0.37, kC), kC) - 0.37) < 1e-12);
  CHECK(inverse_transform(100.0, kC) == 0.0);  // e^-100 < c
}

TEST_CASE("transform round trip on a popularity grid") {
  for (double p : {0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0}) CHECK(std::abs(inverse_transform(transform(p, kC), kC) - p) < 1e-9);
}

TEST_CASE("build_input") {
  PredictorConfig cfg;
  const std::vector<double> zeros(4, 0.0);
  const auto in = build_input(zeros, 0.0, cfg);
  REQUIRE(in.size() == 5);
  CHECK(in[0] == 0.0);
  for (int i = 1; i < 5; ++i) CHECK(std::abs(in[i] - 34.5388) < 1e-3);

  CHECK(build_input(zeros, cfg.epoch_duration, cfg)[0] == 1.0);

  const std::vector<double> f{1.0 - kC, 0.0, 0.0, 0.0};
  const auto mixed = build_input(f, 100.0, cfg);
  CHECK(mixed[0] == 0.5);
  CHECK(std::abs(mixed[1]) < 1e-12);
  for (int i = 2; i < 5; ++i) CHECK(std::abs(mixed[i] - 34.5388) < 1e-3);

  CHECK_THROWS_AS(build_input(zeros, -1.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(build_input(zeros, 200.5, cfg), std::invalid_argument);
}

TEST_CASE("AVG predictor") {
  PredictorConfig cfg;
  AveragePredictor avg(cfg);
  CHECK(avg.predict(0, std::vector<double>{0.1, 0.2, 0.3, 0.4}, 10.0) == doctest::Approx(0.25));
  CHECK(avg.predict(0, std::vector<double>{0, 0, 0, 0}, 10.0) == 0.0);
  // Permutation invariance.
  CHECK(avg.predict(0, std::vector<double>{0.4, 0.1, 0.3, 0.2}, 10.0) == doctest::Approx(0.25));
  // Transformed output agrees with the direct route.
  const std::vector<double> f{0.01, 0.02, 0.0, 0.05};
  CHECK(avg.transformed_output(build_input(f, 3.0, cfg)) == doctest::Approx(transform(0.02, kC)).epsilon(1e-12));
  CHECK_FALSE(avg.trainable());
}

TEST_CASE("fresh network predictions are clamped popularities") {
  PredictorConfig cfg;
  for (auto kind : {PredictorKind::Fnn, PredictorKind::Lr}) {
    const auto pred = make_predictor(kind, cfg, 3);
    for (const auto& f : {std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 1, 1, 1},
                          std::vector<double>{0.3, 0.0, 1e-9, 0.7}}) {
      for (double t : {0.0, 50.0, 200.0}) {
        const double p = pred->predict(0, f, t);
        CHECK(std::isfinite(p));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
}

TEST_CASE("LR predictor is affine in its input") {
  PredictorConfig cfg;
  NetworkPredictor lr(cfg, false, 9);
  CHECK(lr.name() == "lr");
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> x(5), y(5), s(5), z(5, 0.0);
    for (int j = 0; j < 5; ++j) {
      x[j] = 40 * rng.uniform01();
      y[j] = 40 * rng.uniform01();
      s[j] = x[j] + y[j];
    }
    CHECK(lr.transformed_output(s) + lr.transformed_output(z) ==
          doctest::Approx(lr.transformed_output(x) + lr.transformed_output(y)).epsilon(1e-9));
  }
}

TEST_CASE("collected samples resolve to the final epoch popularity") {
  PredictorConfig cfg;
  cfg.validation_fraction = 0.0;
  Rng rng(1);
  {
    FeatureDb db(cfg.k, cfg.epoch_duration);
    SampleCollector col(cfg);
    col.collect(3, db.record_request(3, 1.0), 1.0);
    const auto data = col.resolve(db.rollover(), rng);
    REQUIRE(data.size() == 1);
    CHECK(data.target(0) == doctest::Approx(transform(1.0, kC)));
  }
  {
    FeatureDb db(cfg.k, cfg.epoch_duration);
    SampleCollector col(cfg);
    col.collect(3, db.record_request(3, 1.0), 1.0);
    col.collect(4, db.record_request(4, 2.0), 2.0);
    col.collect(3, db.record_request(3, 5.0), 5.0);
    const auto data = col.resolve(db.rollover(), rng);
    REQUIRE(data.size() == 3);
    CHECK(data.target(0) == data.target(2));
    CHECK(data.target(0) == doctest::Approx(transform(2.0 / 3.0, kC)));
    CHECK(data.input(0)[0] != data.input(2)[0]);
    CHECK(data.input(0)[4] != data.input(2)[4]);
  }
  {
    FeatureDb db(cfg.k, cfg.epoch_duration);
    SampleCollector col(cfg);
    CHECK(col.resolve(db.rollover(), rng).empty());
  }
}

TEST_CASE("collector keeps the newest samples when over the cap") {
  PredictorConfig cfg;
  cfg.max_samples_per_epoch = 3;
  cfg.validation_fraction = 0.0;
  FeatureDb db(cfg.k, cfg.epoch_duration);
  SampleCollector col(cfg);
  for (int i = 0; i < 5; ++i) col.collect(1, db.record_request(1, i * 10.0), i * 10.0);
  Rng rng(1);
  const auto data = col.resolve(db.rollover(), rng);
  REQUIRE(data.size() == 3);
  CHECK(data.input(0)[0] == doctest::Approx(20.0 / cfg.epoch_duration));
}

TEST_CASE("holdout split is deterministic and disjoint") {
  auto a = make_dataset(0, 100, 4, 1.0);
  auto b = make_dataset(0, 100, 4, 1.0);
  Rng ra(5), rb(5);
  a.split_holdout(0.1, ra);
  b.split_holdout(0.1, rb);
  CHECK(a.holdout_indices() == b.holdout_indices());
  CHECK(a.holdout_indices().size() == 10);
  CHECK(a.train_indices().size() == 90);
  for (auto h : a.holdout_indices())
    CHECK(std::find(a.train_indices().begin(), a.train_indices().end(), h) == a.train_indices().end());
}

TEST_CASE("replay learning rates are discounted by age") {
  PredictorConfig cfg;
  cfg.discount = 0.5;
  cfg.replay_depth = 9;
  cfg.learning_rate = 1e-4;
  ReplayBuffer replay(cfg.replay_depth);
  for (std::uint64_t e = 0; e < 4; ++e) replay.push(make_dataset(e, 16, cfg.k, 1.0));
  RecordingPredictor pred(cfg);
  Rng rng(3);
  const auto report = train_epoch_end(pred, replay, rng);
  CHECK(report.dataset_loss.size() == 4);
  for (const auto& call : pred.calls) {
    const auto age = 3 - call.epoch;
    CHECK(call.lr == doctest::Approx(cfg.learning_rate * std::pow(0.5, static_cast<double>(age))));
    CHECK(call.rows <= cfg.batch_size);
  }
  // i = 3 trains with eta / 8.
  CHECK(pred.calls.back().epoch == 0);
  CHECK(pred.calls.back().lr == doctest::Approx(cfg.learning_rate / 8));
  CHECK(pred.calls.size() == 4 * 2);
}

TEST_CASE("replay depth bounds what is retrained") {
  PredictorConfig cfg;
  cfg.replay_depth = 0;
  ReplayBuffer replay(cfg.replay_depth);
  for (std::uint64_t e = 0; e < 3; ++e) replay.push(make_dataset(e, 8, cfg.k, 1.0));
  CHECK(replay.size() == 1);
  RecordingPredictor pred(cfg);
  Rng rng(3);
  train_epoch_end(pred, replay, rng);
  for (const auto& call : pred.calls) CHECK(call.epoch == 2);
}

TEST_CASE("AVG training is a no-op") {
  PredictorConfig cfg;
  ReplayBuffer replay(cfg.replay_depth);
  replay.push(make_dataset(0, 8, cfg.k, 1.0));
  AveragePredictor avg(cfg);
  Rng rng(3);
  const auto report = train_epoch_end(avg, replay, rng);
  CHECK(report.dataset_loss.empty());
  CHECK(report.batch_losses.empty());
  CHECK_FALSE(report.has_validation);
}

TEST_CASE("zero discount equals training on the newest dataset only") {
  PredictorConfig cfg;
  cfg.discount = 0.0;
  cfg.replay_depth = 4;
  cfg.hidden_width = 16;
  Rng split(1);
  ReplayBuffer deep(cfg.replay_depth), shallow(cfg.replay_depth);
  for (std::uint64_t e = 0; e < 4; ++e) {
    auto d = make_dataset(e, 40, cfg.k, static_cast<double>(e));
    d.split_holdout(0.1, split);
    deep.push(d);
    if (e == 3) shallow.push(d);
  }
  NetworkPredictor a(cfg, true, 5), b(cfg, true, 5);
  Rng ra(8), rb(8);
  train_epoch_end(a, deep, ra);
  train_epoch_end(b, shallow, rb);
  CHECK(flatten_parameters(a.network()) == flatten_parameters(b.network()));
  CHECK(flatten_parameters(a.network()) != flatten_parameters(NetworkPredictor(cfg, true, 5).network()));
}

TEST_CASE("a diverging pass is rolled back") {
  PredictorConfig cfg;
  cfg.hidden_width = 8;
  cfg.replay_depth = 0;
  cfg.learning_rate = 10.0;  // far past the stability limit for inputs near F(0)
  NetworkPredictor pred(cfg, false, 3);
  const Mlp before = pred.network();
  ReplayBuffer replay(cfg.replay_depth);
  replay.push(make_dataset(0, 400, cfg.k, 30.0));
  Rng rng(1);
  const TrainingReport report = train_epoch_end(pred, replay, rng);
  CHECK(report.diverged_passes == 1);
  REQUIRE(report.dataset_loss.size() == 1);
  CHECK(std::isnan(report.dataset_loss[0]));
  CHECK(pred.parameters_finite());
  CHECK(flatten_parameters(pred.network()) == flatten_parameters(before));

  cfg.learning_rate = 1e-6;
  NetworkPredictor calm(cfg, false, 3);
  CHECK(train_epoch_end(calm, replay, rng).diverged_passes == 0);
}

TEST_CASE("eval_mse") {
  PredictorConfig cfg;
  // A constant-output predictor against constant targets.
  class Constant final : public Predictor {
   public:
    Constant(const PredictorConfig& c, double v) : Predictor(c), v_(v) {}
    std::string name() const override { return "const"; }
    double transformed_output(std::span<const double>) const override { return v_; }

   private:
    double v_;
  };
  EpochDataset d(0, cfg.k + 1);
  const std::vector<double> in(cfg.k + 1, 1.0);
  for (int i = 0; i < 5; ++i) d.add(in, 3.0);
  CHECK(eval_mse(Constant(cfg, 3.0), d) == 0.0);
  CHECK(eval_mse(Constant(cfg, 1.0), d) == doctest::Approx(4.0));
  CHECK_THROWS_AS(eval_mse(Constant(cfg, 1.0), EpochDataset(0, cfg.k + 1)), UndefinedResultError);

  // AVG is exact when every epoch has the same popularity.
  AveragePredictor avg(cfg);
  EpochDataset stationary(0, cfg.k + 1);
  stationary.add(build_input(std::vector<double>{0.2, 0.2, 0.2, 0.2}, 50.0, cfg), transform(0.2, kC));
  CHECK(eval_mse(avg, stationary) < 1e-20);
}

TEST_CASE("checkpoint round trip") {
  PredictorConfig cfg;
  cfg.hidden_width = 8;
  NetworkPredictor pred(cfg, true, 12);
  const auto j = nlohmann::json::parse(checkpoint(pred).dump());
  const NetworkPredictor back = restore_checkpoint(j);
  CHECK(back.config() == cfg);
  CHECK(back.name() == "fnn");
  CHECK(flatten_parameters(back.network()) == flatten_parameters(pred.network()));
  const std::vector<double> in{0.3, 5, 6, 7, 8};
  CHECK(back.transformed_output(in) == pred.transformed_output(in));
}
