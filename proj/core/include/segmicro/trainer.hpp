#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segmicro/checkpoint.hpp"
#include "segmicro/dataio.hpp"
#include "segmicro/graph.hpp"
#include "segmicro/metrics.hpp"
#include "segmicro/optimizer.hpp"

namespace segmicro {

struct EarlyStopConfig {
  double min_delta = 1e-4;
  int patience = 12;
};

struct ReduceLrConfig {
  double factor = 0.2;
  int patience = 8;
  double min_delta = 1e-4;
};

struct TrainConfig {
  int batch_size = 1;
  int max_epochs = 500;  // safety cap
  EarlyStopConfig early_stop;
  ReduceLrConfig reduce_lr;
  std::uint64_t shuffle_seed = 0;
  std::string checkpoint_path = "checkpoint.bin";
  // Off by default so identical runs serialize identical histories; enable to
  // record real per-epoch wall time in the CSV.
  bool record_wall_time = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;           // rate in effect during the epoch
  double wall_seconds = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // the checkpointed epoch
  std::string stop_reason;

  // CSV with header epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds.
  std::string to_csv() const;
};

// Counts epochs whose val_loss failed to improve on the best by at least
// min_delta (improvement rule: val_loss <= best - min_delta; non-finite
// losses never improve). Reaching `patience` signals a stop.
class EarlyStopTracker {
 public:
  EarlyStopTracker(double min_delta, int patience);
  bool update(double val_loss);  // true = stop now
  int counter() const { return counter_; }

 private:
  double min_delta_;
  int patience_;
  double best_;
  int counter_ = 0;
};

// Same improvement rule with its own counter; after `patience` non-improving
// epochs emits current_lr * factor and resets the counter (best retained).
class PlateauTracker {
 public:
  PlateauTracker(double factor, double min_delta, int patience);
  std::optional<double> update(double val_loss, double current_lr);
  int counter() const { return counter_; }

 private:
  double factor_;
  double min_delta_;
  int patience_;
  double best_;
  int counter_ = 0;
};

struct TrainResult {
  History history;
  std::string checkpoint_path;
};

// Full training protocol: per-epoch shuffled mini-batches, full-pass train
// and validation metrics, LR plateau reduction then early stopping (both on
// val_loss), and a checkpoint whenever val_loss improves the best by at
// least early_stop.min_delta.
TrainResult train(Graph<float>& graph, Optimizer<float>& optimizer,
                  const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config);

// Predicts every sample and pools a MetricsReport over all pixels (restricted
// to each sample's valid region when one is set).
MetricsReport evaluate(const Graph<float>& graph, const Dataset& test_set,
                       int threads = 1);

}  // namespace segmicro
