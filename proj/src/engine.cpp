#include "popcache/engine.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "popcache/atomic_file.hpp"
#include "popcache/config_io.hpp"
#include "popcache/errors.hpp"

namespace popcache {

namespace {

void parallel_for(std::size_t n, std::size_t max_threads, const std::function<void(std::size_t)>& fn) {
  if (max_threads == 0) max_threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(n, max_threads);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double mean_after_first(const std::vector<EpochMetrics>& epochs, double EpochMetrics::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    const double v = epochs[i].*field;
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

void put_number(std::ostream& out, double v) {
  if (std::isnan(v)) return;
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.write(buf, end - buf);
}

}  // namespace

FileTraceSource::FileTraceSource(const std::string& path) : file_(path), reader_(file_) {
  if (!file_) throw std::runtime_error("cannot open trace file '" + path + "'");
}

std::unique_ptr<EventSource> open_trace(const TraceSpec& spec) {
  if (const auto* synth = std::get_if<SyntheticConfig>(&spec.source))
    return std::make_unique<SyntheticTrace>(*synth);
  return std::make_unique<FileTraceSource>(std::get<std::string>(spec.source));
}

void RunConfig::validate() const {
  predictor.validate();
  if (const auto* synth = std::get_if<SyntheticConfig>(&trace.source)) {
    synth->validate();
    if (synth->epoch_duration != predictor.epoch_duration)
      throw std::invalid_argument("synthetic epoch_duration and predictor epoch_duration differ");
  } else if (std::get<std::string>(trace.source).empty()) {
    throw std::invalid_argument("trace file path is empty");
  }
}

double Metrics::hit_rate() const {
  return requests() ? static_cast<double>(hits) / static_cast<double>(requests()) : 0.0;
}

double Metrics::mean_post_warmup_prediction_mse() const {
  return mean_after_first(epochs, &EpochMetrics::prediction_mse);
}

double Metrics::mean_post_warmup_validation_mse() const {
  return mean_after_first(epochs, &EpochMetrics::val_mse);
}

double Metrics::post_warmup_hit_rate() const {
  std::uint64_t h = 0, r = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    h += epochs[i].hits;
    r += epochs[i].requests;
  }
  return r ? static_cast<double>(h) / static_cast<double>(r) : 0.0;
}

Metrics simulate(EventSource& source, const RunConfig& cfg, const SimulationOptions& opts) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const PredictorConfig& pcfg = cfg.predictor;

  Metrics m;
  m.policy = to_string(cfg.policy);
  m.capacity = cfg.capacity;

  FeatureDb db(pcfg.k, pcfg.epoch_duration);

  std::shared_ptr<Predictor> predictor;
  if (const auto kind = predictor_of(cfg.policy)) {
    predictor = opts.predictor ? opts.predictor : make_predictor(*kind, pcfg, derive_seed(cfg.seed, "predictor/init"));
  }
  const bool learning = predictor && opts.train;

  std::unique_ptr<CachePolicy> policy;
  switch (cfg.policy) {
    case PolicyKind::Lru: policy = std::make_unique<LruCache>(cfg.capacity); break;
    case PolicyKind::Arc: policy = std::make_unique<ArcCache>(cfg.capacity); break;
    default:
      policy = std::make_unique<PopularityCache>(cfg.capacity, *predictor, db, cfg.refresh_size,
                                                 derive_seed(cfg.seed, "policy/refresh"));
  }

  SampleCollector collector(pcfg);
  ReplayBuffer replay(pcfg.replay_depth);
  Rng train_rng(derive_seed(cfg.seed, "predictor/train"));
  Rng holdout_rng(derive_seed(cfg.seed, "predictor/holdout"));

  EpochMetrics current;
  auto close_epoch = [&](bool train) {
    const FinalizedEpoch finalized = db.rollover();
    if (learning) {
      EpochDataset data = collector.resolve(finalized, holdout_rng);
      if (!data.empty()) current.prediction_mse = eval_mse(*predictor, data);
      replay.push(std::move(data));
      if (train) {
        TrainingReport report = train_epoch_end(*predictor, replay, train_rng);
        if (!report.dataset_loss.empty()) current.train_mse = report.dataset_loss.front();
        if (report.has_validation) current.val_mse = report.validation_loss;
        m.loss_curve.insert(m.loss_curve.end(), report.batch_losses.begin(), report.batch_losses.end());
        m.diverged_passes += report.diverged_passes;
      }
    }
    m.epochs.push_back(current);
    if (opts.on_epoch) opts.on_epoch(current);
    current = EpochMetrics{};
    current.epoch = db.epoch_index();
  };

  bool any = false;
  while (const auto ev = source.next()) {
    const std::uint64_t epoch = epoch_of(ev->time, pcfg.epoch_duration);
    while (db.epoch_index() < epoch) close_epoch(true);
    any = true;

    const std::vector<double> features = db.record_request(ev->content_id, ev->time);
    const double t = std::clamp(ev->time - db.epoch_start(), 0.0, pcfg.epoch_duration);
    const AccessResult res = policy->on_request({ev->content_id, t, features});
    if (learning) collector.collect(ev->content_id, features, t);

    ++current.requests;
    if (res.hit()) {
      ++current.hits;
      ++m.hits;
    } else {
      ++m.misses;
    }
  }
  if (any) close_epoch(false);

  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return m;
}

Metrics run(const RunConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  auto source = open_trace(cfg.trace);
  SimulationOptions opts;
  opts.on_epoch = on_epoch;
  Metrics m = simulate(*source, cfg, opts);
  if (!cfg.metrics_path.empty()) write_metrics_files(m, cfg);
  return m;
}

std::vector<ComparisonRow> compare(const std::vector<RunConfig>& cfgs, std::size_t max_threads) {
  for (const auto& c : cfgs) {
    if (!(c.trace == cfgs.front().trace) || c.seed != cfgs.front().seed)
      throw std::invalid_argument("compare: all runs must share the trace source and seed");
    c.validate();
  }
  std::vector<ComparisonRow> rows(cfgs.size());
  parallel_for(cfgs.size(), max_threads, [&](std::size_t i) {
    RunConfig c = cfgs[i];
    c.metrics_path.clear();
    const Metrics m = run(c);
    rows[i] = ComparisonRow{m.policy, m.capacity, m.hit_rate(), m.post_warmup_hit_rate(),
                            m.mean_post_warmup_prediction_mse()};
  });
  return rows;
}

std::vector<PredictorScore> eval_predictors(const TraceSpec& trace, const PredictorConfig& cfg, std::uint64_t seed,
                                            std::size_t max_threads) {
  const PolicyKind kinds[] = {PolicyKind::Fnn, PolicyKind::Lr, PolicyKind::Avg};
  std::vector<PredictorScore> scores(std::size(kinds));
  parallel_for(std::size(kinds), max_threads, [&](std::size_t i) {
    RunConfig rc;
    rc.trace = trace;
    rc.policy = kinds[i];
    rc.capacity = 0;
    rc.predictor = cfg;
    rc.seed = seed;
    auto source = open_trace(trace);
    const Metrics m = simulate(*source, rc);
    if (m.epochs.size() < 2) throw UndefinedResultError("eval_predictors: trace spans fewer than two epochs");
    PredictorScore& s = scores[i];
    s.predictor = to_string(kinds[i]);
    for (const auto& e : m.epochs) s.per_epoch.push_back(e.prediction_mse);
    s.prediction_mse = m.mean_post_warmup_prediction_mse();
    s.validation_mse = m.mean_post_warmup_validation_mse();
  });
  return scores;
}

std::vector<CurvePoint> learning_curve(const TraceSpec& trace, const PredictorConfig& cfg, PredictorKind kind,
                                       std::uint64_t seed, std::size_t iterations, std::size_t eval_every,
                                       std::uint64_t epoch) {
  if (kind == PredictorKind::Avg) throw std::invalid_argument("learning_curve: AVG has nothing to train");
  if (eval_every == 0) throw std::invalid_argument("learning_curve: eval_every must be >= 1");
  cfg.validate();

  auto source = open_trace(trace);
  FeatureDb db(cfg.k, cfg.epoch_duration);
  SampleCollector collector(cfg);
  Rng holdout_rng(derive_seed(seed, "predictor/holdout"));
  EpochDataset data;
  bool resolved = false;
  auto close = [&] {
    const FinalizedEpoch fin = db.rollover();
    if (fin.epoch() == epoch) {
      data = collector.resolve(fin, holdout_rng);
      resolved = true;
    }
  };
  while (const auto ev = source->next()) {
    const std::uint64_t e = epoch_of(ev->time, cfg.epoch_duration);
    while (db.epoch_index() < e && !resolved) close();
    if (resolved) break;
    const auto features = db.record_request(ev->content_id, ev->time);
    if (db.epoch_index() == epoch)
      collector.collect(ev->content_id, features,
                        std::clamp(ev->time - db.epoch_start(), 0.0, cfg.epoch_duration));
  }
  if (!resolved && db.epoch_index() == epoch) close();
  if (!resolved || data.train_indices().empty() || data.holdout_indices().empty())
    throw UndefinedResultError("learning_curve: trace has no usable data for the requested epoch");

  NetworkPredictor pred(cfg, kind == PredictorKind::Fnn, derive_seed(seed, "predictor/init"));
  Rng rng(derive_seed(seed, "predictor/train"));
  std::vector<std::size_t> order = data.train_indices();
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;

  std::vector<CurvePoint> curve;
  curve.push_back({0, std::numeric_limits<double>::quiet_NaN(), eval_mse(pred, data, data.holdout_indices())});
  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  for (std::size_t it = 1; it <= iterations; ++it) {
    if (cursor >= order.size()) {
      rng.shuffle(std::span<std::size_t>(order));
      cursor = 0;
    }
    const std::size_t len = std::min(cfg.batch_size, order.size() - cursor);
    loss_sum += pred.train_batch(data, std::span<const std::size_t>(order).subspan(cursor, len), cfg.learning_rate);
    ++loss_n;
    cursor += len;
    if (it % eval_every == 0) {
      curve.push_back({it, loss_sum / static_cast<double>(loss_n), eval_mse(pred, data, data.holdout_indices())});
      loss_sum = 0.0;
      loss_n = 0;
    }
  }
  return curve;
}

void write_metrics_csv(std::ostream& out, const Metrics& m) {
  out << "epoch,requests,hits,hit_rate,train_mse,val_mse\n";
  for (const auto& e : m.epochs) {
    out << e.epoch << ',' << e.requests << ',' << e.hits << ',';
    put_number(out, e.hit_rate());
    out << ',';
    put_number(out, e.train_mse);
    out << ',';
    put_number(out, e.val_mse);
    out << '\n';
  }
}

nlohmann::json summary_json(const Metrics& m, const RunConfig& cfg) {
  return {{"policy", m.policy},
          {"capacity", m.capacity},
          {"requests", m.requests()},
          {"hits", m.hits},
          {"misses", m.misses},
          {"hit_rate", m.hit_rate()},
          {"post_warmup_hit_rate", m.post_warmup_hit_rate()},
          {"mean_post_warmup_prediction_mse", m.mean_post_warmup_prediction_mse()},
          {"mean_post_warmup_validation_mse", m.mean_post_warmup_validation_mse()},
          {"mse_averaging", "mean of per-epoch values, epoch 0 excluded"},
          {"epochs", m.epochs.size()},
          {"diverged_training_passes", m.diverged_passes},
          {"seed", cfg.seed},
          {"wall_clock_seconds", m.wall_seconds},
          {"config", to_json(cfg)}};
}

std::string summary_path_for(const std::string& metrics_path) {
  const auto slash = metrics_path.find_last_of('/');
  const auto dot = metrics_path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
    return metrics_path.substr(0, dot) + ".json";
  return metrics_path + ".json";
}

void write_metrics_files(const Metrics& m, const RunConfig& cfg) {
  std::ostringstream csv;
  write_metrics_csv(csv, m);
  write_file_atomically(cfg.metrics_path, csv.str());
  write_file_atomically(summary_path_for(cfg.metrics_path), summary_json(m, cfg).dump(2) + "\n");
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "policy,capacity,hit_rate,post_warmup_hit_rate,prediction_mse\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << r.capacity << ',';
    put_number(out, r.hit_rate);
    out << ',';
    put_number(out, r.post_warmup_hit_rate);
    out << ',';
    put_number(out, r.prediction_mse);
    out << '\n';
  }
}

void write_scores_csv(std::ostream& out, const std::vector<PredictorScore>& scores) {
  out << "predictor,prediction_mse,validation_mse\n";
  for (const auto& s : scores) {
    out << s.predictor << ',';
    put_number(out, s.prediction_mse);
    out << ',';
    put_number(out, s.validation_mse);
    out << '\n';
  }
}

}  // namespace popcache
