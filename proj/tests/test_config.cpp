#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "segmicro/config.hpp"

using namespace segmicro;

namespace {

const char* kFullConfig = R"({
  "schema": 1,
  "seed": 42,
  "model": {
    "arch": "unet",
    "num_channels": 1,
    "num_classes": 3,
    "filters": [16, 32, 64, 128, 256],
    "conv_kernel": 3,
    "deconv_kernel": 2,
    "out_kernel": 1
  },
  "optimizer": {"kind": "adam"},
  "training": {
    "batch_size": 2,
    "max_epochs": 100,
    "early_stop": {"min_delta": 1e-4, "patience": 12},
    "reduce_lr": {"factor": 0.2, "patience": 8, "min_delta": 1e-4}
  },
  "data": {
    "train_manifest": "data/train/manifest.json",
    "val_fraction": 0.1,
    "target_size": [512, 512],
    "multiplier": 32,
    "equalize": true,
    "policy": {
      "flip_prob": 0.5,
      "warp_prob": 0.5,
      "warp_amplitude": [10, 50],
      "warp_frequency": [0.5, 2.0],
      "max_rotation_deg": 60,
      "zoom_range": [0.8, 1.2]
    }
  }
})";

}  // namespace

TEST_CASE("a full config parses into every section") {
  const ExperimentConfig cfg = parse_experiment_config(kFullConfig);
  CHECK(cfg.schema == 1);
  CHECK(cfg.seed == 42);

  REQUIRE(cfg.has_model);
  CHECK(cfg.model.arch == Arch::UNet);
  CHECK(cfg.model.filters == std::vector<int>{16, 32, 64, 128, 256});
  CHECK(cfg.model.deconv_kernel == 2);

  REQUIRE(cfg.has_optimizer);
  CHECK(cfg.optimizer_kind == OptimizerKind::Adam);
  CHECK_FALSE(cfg.optimizer_overrides.lr.has_value());

  REQUIRE(cfg.has_training);
  CHECK(cfg.training.batch_size == 2);
  CHECK(cfg.training.max_epochs == 100);
  CHECK(cfg.training.early_stop.patience == 12);
  CHECK(cfg.training.reduce_lr.factor == 0.2);
  CHECK(cfg.training.shuffle_seed == 42);  // defaults to the config seed
  CHECK_FALSE(cfg.training.record_wall_time);

  REQUIRE(cfg.has_data);
  CHECK(cfg.data.train_manifest == "data/train/manifest.json");
  CHECK(cfg.data.val_fraction == 0.1);
  CHECK(cfg.data.multiplier == 32);
  CHECK(cfg.data.policy.target_height == 512);
  CHECK(cfg.data.policy.equalize);
  CHECK(cfg.data.policy.max_rotation_deg == 60);
}

TEST_CASE("unknown keys are rejected with their name") {
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(R"({"schema": 1, "sead": 3})"),
      doctest::Contains("sead"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(
          R"({"schema": 1, "model": {"arch": "fcn", "num_channels": 1,
              "num_classes": 3, "filters": [4, 8, 4], "conv_kernel": 3,
              "out_kernel": 1, "paddding": "same"}})"),
      doctest::Contains("paddding"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(
          R"({"schema": 1, "optimizer": {"kind": "adam", "lr2": 0.1}})"),
      doctest::Contains("lr2"), ConfigError);
}

TEST_CASE("schema version is mandatory and checked") {
  CHECK_THROWS_AS(parse_experiment_config(R"({"seed": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"schema": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("not json at all"), ConfigError);
}

TEST_CASE("deconv_kernel is rejected for the fcn") {
  CHECK_THROWS_AS(parse_experiment_config(
                      R"({"schema": 1, "model": {"arch": "fcn",
                          "num_channels": 1, "num_classes": 3,
                          "filters": [4, 8, 4], "conv_kernel": 3,
                          "out_kernel": 1, "deconv_kernel": 2}})"),
                  ConfigError);
}

TEST_CASE("optimizer overrides flow through") {
  const ExperimentConfig cfg = parse_experiment_config(
      R"({"schema": 1,
          "optimizer": {"kind": "nadam", "beta2": 0.0, "lr": 0.5}})");
  CHECK(cfg.optimizer_kind == OptimizerKind::Nadam);
  CHECK(cfg.optimizer_overrides.beta2 == 0.0);
  CHECK(cfg.optimizer_overrides.lr == 0.5);

  Optimizer<float> opt(cfg.optimizer_kind, cfg.optimizer_overrides);
  CHECK(opt.hyperparams().beta2 == 0.0);  // the paper's literal value
  CHECK(opt.hyperparams().lr == 0.5);
}

TEST_CASE("fixed pool size and deconv strides are enforced") {
  CHECK_THROWS_AS(parse_experiment_config(
                      R"({"schema": 1, "model": {"arch": "unet",
                          "num_channels": 1, "num_classes": 3,
                          "filters": [2, 4, 8, 16, 32], "conv_kernel": 3,
                          "out_kernel": 1, "pool_size": 3}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(
                      R"({"schema": 1, "model": {"arch": "unet",
                          "num_channels": 1, "num_classes": 3,
                          "filters": [2, 4, 8, 16, 32], "conv_kernel": 3,
                          "out_kernel": 1, "deconv_strides": [3, 3]}})"),
                  ConfigError);
  // The published values pass.
  CHECK_NOTHROW(parse_experiment_config(
      R"({"schema": 1, "model": {"arch": "unet", "num_channels": 1,
          "num_classes": 3, "filters": [2, 4, 8, 16, 32], "conv_kernel": 3,
          "out_kernel": 1, "pool_size": 2, "deconv_strides": [2, 2]}})"));
}

TEST_CASE("config hash is stable and content-sensitive") {
  const std::string a = kFullConfig;
  std::string b = a;
  b.replace(b.find("42"), 2, "43");
  CHECK(config_hash_hex(a) == config_hash_hex(a));
  CHECK(config_hash_hex(a) != config_hash_hex(b));
  CHECK(config_hash_hex(a).size() == 16);
}
