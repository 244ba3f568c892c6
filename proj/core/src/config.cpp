#include "segmicro/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

using nlohmann::json;

namespace segmicro {

namespace {

std::pair<double, double> range_from(const json& j, const std::string& name) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) {
    throw ConfigError(name + " must be a [lo, hi] pair");
  }
  return {v[0], v[1]};
}

AugmentPolicy policy_from_json(const json& j) {
  detail::check_keys(j,
                     {"flip_prob", "warp_prob", "warp_amplitude",
                      "warp_frequency", "max_rotation_deg", "zoom_range"},
                     "data.policy");
  AugmentPolicy p;
  if (j.contains("flip_prob")) p.flip_prob = j["flip_prob"].get<double>();
  if (j.contains("warp_prob")) p.warp_prob = j["warp_prob"].get<double>();
  if (j.contains("warp_amplitude")) {
    p.warp_amplitude = range_from(j["warp_amplitude"], "data.policy.warp_amplitude");
  }
  if (j.contains("warp_frequency")) {
    p.warp_frequency = range_from(j["warp_frequency"], "data.policy.warp_frequency");
  }
  if (j.contains("max_rotation_deg")) {
    p.max_rotation_deg = j["max_rotation_deg"].get<double>();
  }
  if (j.contains("zoom_range")) {
    p.zoom_range = range_from(j["zoom_range"], "data.policy.zoom_range");
  }
  return p;
}

OptimizerOverrides overrides_from_json(const json& j) {
  OptimizerOverrides ov;
  if (j.contains("lr")) ov.lr = j["lr"].get<double>();
  if (j.contains("rho")) ov.rho = j["rho"].get<double>();
  if (j.contains("beta1")) ov.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) ov.beta2 = j["beta2"].get<double>();
  if (j.contains("momentum")) ov.momentum = j["momentum"].get<double>();
  if (j.contains("epsilon")) ov.epsilon = j["epsilon"].get<double>();
  return ov;
}

TrainConfig training_from_json(const json& j, std::uint64_t default_seed) {
  detail::check_keys(j,
                     {"batch_size", "max_epochs", "early_stop", "reduce_lr",
                      "shuffle_seed", "wall_time"},
                     "training");
  TrainConfig t;
  t.shuffle_seed = default_seed;
  if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<int>();
  if (j.contains("max_epochs")) t.max_epochs = j["max_epochs"].get<int>();
  if (j.contains("early_stop")) {
    const json& e = j["early_stop"];
    detail::check_keys(e, {"min_delta", "patience"}, "training.early_stop");
    if (e.contains("min_delta")) {
      t.early_stop.min_delta = e["min_delta"].get<double>();
    }
    if (e.contains("patience")) {
      t.early_stop.patience = e["patience"].get<int>();
    }
  }
  if (j.contains("reduce_lr")) {
    const json& r = j["reduce_lr"];
    detail::check_keys(r, {"factor", "patience", "min_delta"},
                       "training.reduce_lr");
    if (r.contains("factor")) t.reduce_lr.factor = r["factor"].get<double>();
    if (r.contains("patience")) {
      t.reduce_lr.patience = r["patience"].get<int>();
    }
    if (r.contains("min_delta")) {
      t.reduce_lr.min_delta = r["min_delta"].get<double>();
    }
  }
  if (j.contains("shuffle_seed")) {
    t.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
  }
  if (j.contains("wall_time")) {
    t.record_wall_time = j["wall_time"].get<bool>();
  }
  t.validate();
  return t;
}

DataConfig data_from_json(const json& j) {
  detail::check_keys(j,
                     {"train_manifest", "test_manifest", "val_fraction",
                      "target_size", "multiplier", "equalize", "policy"},
                     "data");
  DataConfig d;
  if (j.contains("train_manifest")) {
    d.train_manifest = j["train_manifest"].get<std::string>();
  }
  if (j.contains("test_manifest")) {
    d.test_manifest = j["test_manifest"].get<std::string>();
  }
  if (j.contains("val_fraction")) {
    d.val_fraction = j["val_fraction"].get<double>();
  }
  if (j.contains("multiplier")) d.multiplier = j["multiplier"].get<int>();
  if (j.contains("policy")) d.policy = policy_from_json(j["policy"]);
  if (j.contains("target_size")) {
    const auto size = j["target_size"].get<std::vector<int>>();
    if (size.size() != 2 || size[0] < 1 || size[1] < 1) {
      throw ConfigError("data.target_size must be [height, width]");
    }
    d.policy.target_height = size[0];
    d.policy.target_width = size[1];
  }
  if (j.contains("equalize")) {
    d.policy.equalize = j["equalize"].get<bool>();
  }
  d.policy.validate();
  return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::check_keys(
      doc, {"schema", "seed", "model", "optimizer", "training", "data"},
      "config");
  if (!doc.contains("schema")) {
    throw ConfigError("config is missing the 'schema' version field");
  }
  ExperimentConfig cfg;
  cfg.source_text = json_text;
  cfg.schema = doc["schema"].get<int>();
  if (cfg.schema != 1) {
    throw ConfigError("unsupported config schema version " +
                      std::to_string(cfg.schema));
  }
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("model")) {
    cfg.model = detail::model_config_from_json(doc["model"], "model");
    cfg.has_model = true;
  }
  if (doc.contains("optimizer")) {
    const json& o = doc["optimizer"];
    detail::check_keys(
        o, {"kind", "lr", "rho", "beta1", "beta2", "momentum", "epsilon"},
        "optimizer");
    if (!o.contains("kind")) {
      throw ConfigError("optimizer section is missing 'kind'");
    }
    cfg.optimizer_kind = optimizer_kind_from_name(o["kind"].get<std::string>());
    cfg.optimizer_overrides = overrides_from_json(o);
    cfg.has_optimizer = true;
  }
  if (doc.contains("training")) {
    cfg.training = training_from_json(doc["training"], cfg.seed);
    cfg.shuffle_seed_explicit = doc["training"].contains("shuffle_seed");
    cfg.has_training = true;
  }
  if (doc.contains("data")) {
    cfg.data = data_from_json(doc["data"]);
    cfg.has_data = true;
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_experiment_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

std::uint64_t fnv1a_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash_hex(const std::string& config_text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(config_text)));
  return buf;
}

}  // namespace segmicro
