#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segmicro/errors.hpp"
#include "segmicro/graph.hpp"

namespace segmicro::detail {

// Rejects keys outside `allowed`, naming the offender and its section.
inline void check_keys(const nlohmann::json& obj,
                       const std::vector<std::string>& allowed,
                       const std::string& section) {
  if (!obj.is_object()) {
    throw ConfigError("'" + section + "' must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const auto& a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
  nlohmann::json j;
  j["arch"] = arch_name(m.arch);
  j["num_channels"] = m.num_channels;
  j["num_classes"] = m.num_classes;
  j["filters"] = m.filters;
  j["conv_kernel"] = m.conv_kernel;
  if (m.arch == Arch::UNet) j["deconv_kernel"] = m.deconv_kernel;
  j["out_kernel"] = m.out_kernel;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j,
                                          const std::string& section) {
  check_keys(j,
             {"arch", "num_channels", "num_classes", "filters", "conv_kernel",
              "deconv_kernel", "out_kernel", "pool_size", "deconv_strides"},
             section);
  for (const auto& key : {"arch", "num_channels", "num_classes", "filters",
                          "conv_kernel", "out_kernel"}) {
    if (!j.contains(key)) {
      throw ConfigError(section + " is missing '" + std::string(key) + "'");
    }
  }
  ModelConfig m;
  m.arch = arch_from_name(j["arch"].get<std::string>());
  m.num_channels = j["num_channels"].get<int>();
  m.num_classes = j["num_classes"].get<int>();
  m.filters = j["filters"].get<std::vector<int>>();
  m.conv_kernel = j["conv_kernel"].get<int>();
  m.out_kernel = j["out_kernel"].get<int>();
  if (j.contains("deconv_kernel")) {
    if (m.arch != Arch::UNet) {
      throw ConfigError(section + ".deconv_kernel only applies to the U-Net");
    }
    m.deconv_kernel = j["deconv_kernel"].get<int>();
  }
  if (j.contains("pool_size")) m.pool_size = j["pool_size"].get<int>();
  if (j.contains("deconv_strides")) {
    const auto strides = j["deconv_strides"].get<std::vector<int>>();
    if (strides.size() != 2 || strides[0] != strides[1]) {
      throw ConfigError(section + ".deconv_strides must be [s, s]");
    }
    m.deconv_stride = strides[0];
  }
  m.validate();
  return m;
}

}  // namespace segmicro::detail
