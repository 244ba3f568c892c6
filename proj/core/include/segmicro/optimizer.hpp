#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segmicro/errors.hpp"

namespace segmicro {

enum class OptimizerKind {
  Sgd,
  SgdNesterov,
  RmsProp,
  Adagrad,
  Adadelta,
  Adam,
  Adamax,
  Nadam,
};

std::string optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct OptimizerOverrides {
  std::optional<double> lr;
  std::optional<double> rho;
  std::optional<double> beta1;
  std::optional<double> beta2;
  std::optional<double> momentum;
  std::optional<double> epsilon;
};

struct OptimizerHyperparams {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 0.001;
  double rho = 0.9;        // RMSprop / Adadelta
  double beta1 = 0.9;      // Adam family
  double beta2 = 0.999;    // Adam family
  double momentum = 0.0;   // Nesterov
  double epsilon = 1e-8;

  // Per-optimizer defaults: Adam 0.001; SGD 0.01; SGD+Nesterov 0.01/0.9;
  // RMSprop 0.001/0.9; Adagrad 0.01; Adadelta 1.0/0.95; Adamax 0.002;
  // Nadam 0.002. Epsilon is 1e-8 for the Adam family and 1e-7 for
  // RMSprop/Adagrad/Adadelta.
  static OptimizerHyperparams defaults(OptimizerKind kind);

  void validate() const;
};

// State of one update rule: hyperparameters, step counter, the mutable
// learning rate, and per-parameter accumulator arrays sized on first use.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind,
                     const OptimizerOverrides& overrides = {});
  explicit Optimizer(OptimizerHyperparams hp);

  const OptimizerHyperparams& hyperparams() const { return hp_; }
  double current_lr() const { return current_lr_; }
  std::int64_t step_count() const { return t_; }

  // Replaces the working learning rate; accumulators are untouched.
  void set_lr(double lr);

  // Applies one update to every parameter array. Accumulators are allocated
  // (zeroed) on the first call and must keep their sizes afterwards.
  void step(std::vector<std::span<T>> params,
            const std::vector<std::span<const T>>& grads);

 private:
  void ensure_slots(const std::vector<std::span<T>>& params);

  OptimizerHyperparams hp_;
  double current_lr_ = 0.0;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> slot_a_;  // first moment / sq-grad accumulator
  std::vector<std::vector<T>> slot_b_;  // second moment / delta accumulator
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace segmicro
