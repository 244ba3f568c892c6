#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "segmicro/augment.hpp"
#include "segmicro/graph.hpp"
#include "segmicro/optimizer.hpp"
#include "segmicro/trainer.hpp"

namespace segmicro {

struct DataConfig {
  std::string train_manifest;
  std::string test_manifest;
  double val_fraction = 0.1;
  int multiplier = 1;
  AugmentPolicy policy;  // carries target_size and the equalize flag
};

// One experiment = one JSON document with a versioned schema, a seed and the
// model / optimizer / training / data sections. Unknown keys are rejected.
struct ExperimentConfig {
  int schema = 1;
  std::uint64_t seed = 0;

  bool has_model = false;
  ModelConfig model;

  bool has_optimizer = false;
  OptimizerKind optimizer_kind = OptimizerKind::Adam;
  OptimizerOverrides optimizer_overrides;

  bool has_training = false;
  bool shuffle_seed_explicit = false;
  TrainConfig training;

  bool has_data = false;
  DataConfig data;

  // Raw document text, kept for hashing and artifact bookkeeping.
  std::string source_text;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::uint64_t fnv1a_hash(std::string_view text);

// 16-hex-digit content hash used to key experiment output directories.
std::string config_hash_hex(const std::string& config_text);

}  // namespace segmicro
