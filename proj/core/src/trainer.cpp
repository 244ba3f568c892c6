#include "segmicro/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "segmicro/rng.hpp"
#include "segmicro/threading.hpp"

namespace segmicro {

namespace {

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Copies the selected samples into one batch tensor plus one-hot targets.
struct Batch {
  Tensor4<float> input;
  Tensor4<float> targets;
};

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end, int num_classes) {
  const Shape4& s0 = data.samples[order[begin]].image.shape();
  const int n = static_cast<int>(end - begin);
  Batch batch{Tensor4<float>({n, s0.height, s0.width, s0.channels}),
              Tensor4<float>({n, s0.height, s0.width, num_classes})};
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& sample = data.samples[order[i]];
    require_same_shape(sample.image.shape(), s0, "batch assembly");
    const int b = static_cast<int>(i - begin);
    const float* src = sample.image.data();
    float* dst = batch.input.pixel(b, 0, 0);
    std::copy(src, src + sample.image.size(), dst);
    for (int y = 0; y < s0.height; ++y) {
      for (int x = 0; x < s0.width; ++x) {
        const int cls = sample.mask.at(y, x);
        if (cls >= num_classes) {
          throw DataError("sample '" + sample.id + "' has label " +
                          std::to_string(cls) + " >= num_classes " +
                          std::to_string(num_classes));
        }
        batch.targets.at(b, y, x, cls) = 1.0f;
      }
    }
  }
  return batch;
}

struct PassMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Loss and pixel accuracy over a whole set, pooled over pixels.
PassMetrics full_pass(Graph<float>& graph, const Dataset& data,
                      int batch_size, int num_classes) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double loss_sum = 0.0;
  std::int64_t pixels = 0;
  std::int64_t correct = 0;
  for (std::size_t begin = 0; begin < order.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(begin + static_cast<std::size_t>(batch_size), order.size());
    Batch batch = make_batch(data, order, begin, end, num_classes);
    const Tensor4<float> probs = graph.forward(batch.input);
    const auto ce = cross_entropy(probs, batch.targets);
    const Shape4& s = probs.shape();
    const std::int64_t batch_pixels =
        static_cast<std::int64_t>(s.batch) * s.height * s.width;
    loss_sum += ce.loss * static_cast<double>(batch_pixels);
    pixels += batch_pixels;
    for (int b = 0; b < s.batch; ++b) {
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          const float* p = probs.pixel(b, y, x);
          int best = 0;
          for (int c = 1; c < s.channels; ++c) {
            if (p[c] > p[best]) best = c;
          }
          const float* t = batch.targets.pixel(b, y, x);
          correct += t[best] == 1.0f;
        }
      }
    }
  }
  PassMetrics out;
  out.loss = pixels > 0 ? loss_sum / static_cast<double>(pixels) : 0.0;
  out.accuracy =
      pixels > 0 ? static_cast<double>(correct) / static_cast<double>(pixels)
                 : 0.0;
  return out;
}

bool improved(double val_loss, double best, double min_delta) {
  return val_loss <= best - min_delta;  // NaN compares false: no improvement
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) {
    throw ConfigError("training.batch_size must be >= 1, got " +
                      std::to_string(batch_size));
  }
  if (max_epochs < 1) {
    throw ConfigError("training.max_epochs must be >= 1, got " +
                      std::to_string(max_epochs));
  }
  if (early_stop.patience < 1 || reduce_lr.patience < 1) {
    throw ConfigError("training patience values must be >= 1");
  }
  if (!(reduce_lr.factor > 0.0 && reduce_lr.factor < 1.0)) {
    throw ConfigError("training.reduce_lr.factor must lie in (0, 1), got " +
                      std::to_string(reduce_lr.factor));
  }
}

std::string History::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n";
  char buf[256];
  for (const EpochRecord& r : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%s,%s,%s,%.3f\n", r.epoch,
                  format_metric(r.train_loss).c_str(),
                  format_metric(r.train_acc).c_str(),
                  format_metric(r.val_loss).c_str(),
                  format_metric(r.val_acc).c_str(),
                  format_metric(r.lr).c_str(), r.wall_seconds);
    out += buf;
  }
  return out;
}

EarlyStopTracker::EarlyStopTracker(double min_delta, int patience)
    : min_delta_(min_delta),
      patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopTracker::update(double val_loss) {
  if (improved(val_loss, best_, min_delta_)) {
    best_ = val_loss;
    counter_ = 0;
    return false;
  }
  ++counter_;
  if (counter_ >= patience_) {
    counter_ = 0;
    return true;
  }
  return false;
}

PlateauTracker::PlateauTracker(double factor, double min_delta, int patience)
    : factor_(factor),
      min_delta_(min_delta),
      patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

std::optional<double> PlateauTracker::update(double val_loss,
                                             double current_lr) {
  if (improved(val_loss, best_, min_delta_)) {
    best_ = val_loss;
    counter_ = 0;
    return std::nullopt;
  }
  ++counter_;
  if (counter_ >= patience_) {
    counter_ = 0;  // best retained
    return current_lr * factor_;
  }
  return std::nullopt;
}

TrainResult train(Graph<float>& graph, Optimizer<float>& optimizer,
                  const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw DataError("train: training and validation sets must be non-empty");
  }
  const int num_classes = graph.config().num_classes;

  TrainResult result;
  result.checkpoint_path = config.checkpoint_path;
  History& history = result.history;

  EarlyStopTracker stopper(config.early_stop.min_delta,
                           config.early_stop.patience);
  PlateauTracker plateau(config.reduce_lr.factor, config.reduce_lr.min_delta,
                         config.reduce_lr.patience);
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  history.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const double epoch_lr = optimizer.current_lr();

    // Per-epoch shuffle seeded by shuffle_seed + epoch.
    Rng rng(config.shuffle_seed + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.index(i));
      std::swap(order[i - 1], order[j]);
    }

    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          begin + static_cast<std::size_t>(config.batch_size), order.size());
      Batch batch = make_batch(train_set, order, begin, end, num_classes);
      const Tensor4<float> probs = graph.forward(batch.input);
      const auto ce = cross_entropy(probs, batch.targets);
      if (!std::isfinite(ce.loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      const Gradients<float> grads = graph.backward(batch.input, ce.grad);
      optimizer.step(graph.param_spans(), grads.spans());
      ++batch_index;
    }

    const PassMetrics train_metrics =
        full_pass(graph, train_set, config.batch_size, num_classes);
    const PassMetrics val_metrics =
        full_pass(graph, val_set, config.batch_size, num_classes);

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = train_metrics.loss;
    record.train_acc = train_metrics.accuracy;
    record.val_loss = val_metrics.loss;
    record.val_acc = val_metrics.accuracy;
    record.lr = epoch_lr;
    if (config.record_wall_time) {
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        epoch_start)
              .count();
    }
    history.epochs.push_back(record);

    if (improved(val_metrics.loss, best_val, config.early_stop.min_delta)) {
      best_val = val_metrics.loss;
      history.best_epoch = epoch;
      CheckpointMeta meta;
      meta.optimizer_kind = optimizer_kind_name(optimizer.hyperparams().kind);
      meta.epoch = epoch;
      meta.val_loss = val_metrics.loss;
      save_checkpoint(graph, meta, config.checkpoint_path);
    }

    // Reduction is evaluated before the stop check at every epoch end.
    if (const auto new_lr = plateau.update(val_metrics.loss, epoch_lr)) {
      optimizer.set_lr(*new_lr);
    }
    if (stopper.update(val_metrics.loss)) {
      history.stop_reason = "early_stop";
      break;
    }
  }
  return result;
}

MetricsReport evaluate(const Graph<float>& graph, const Dataset& test_set,
                       int threads) {
  const int num_classes = graph.config().num_classes;
  std::vector<LabelMap> preds(test_set.size());
  std::vector<LabelMap> truths(test_set.size());

  auto predict_one = [&](Graph<float>& g, std::size_t i) {
    const Sample& sample = test_set.samples[i];
    LabelMap pred = g.predict(sample.image);
    LabelMap truth = sample.mask;
    truth.num_classes = num_classes;
    if (sample.valid_height > 0 && sample.valid_width > 0) {
      // Metrics are computed on the unpadded region only.
      LabelMap pc(sample.valid_height, sample.valid_width, num_classes);
      LabelMap tc(sample.valid_height, sample.valid_width, num_classes);
      for (int y = 0; y < sample.valid_height; ++y) {
        for (int x = 0; x < sample.valid_width; ++x) {
          pc.at(y, x) = pred.at(y, x);
          tc.at(y, x) = truth.at(y, x);
        }
      }
      pred = std::move(pc);
      truth = std::move(tc);
    }
    preds[i] = std::move(pred);
    truths[i] = std::move(truth);
  };

  if (threads <= 1) {
    Graph<float> local = graph;
    for (std::size_t i = 0; i < test_set.size(); ++i) predict_one(local, i);
  } else {
    // Samples write disjoint slots; each takes its own graph copy since
    // forward mutates the activation cache.
    parallel_for(test_set.size(), threads, [&](std::size_t i) {
      Graph<float> local = graph;
      predict_one(local, i);
    });
  }
  return dice_report(preds, truths, num_classes);
}

}  // namespace segmicro
