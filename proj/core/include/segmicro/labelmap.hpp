#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segmicro/errors.hpp"

namespace segmicro {

// Per-pixel class indices for one image. Every value is < num_classes.
struct LabelMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;

  LabelMap(int h, int w, int classes, std::uint8_t fill = 0)
      : height(h), width(w), num_classes(classes) {
    if (h < 1 || w < 1) {
      throw ShapeError("LabelMap dimensions must be >= 1, got " +
                       std::to_string(h) + "x" + std::to_string(w));
    }
    labels.assign(static_cast<std::size_t>(h) * w, fill);
  }

  std::uint8_t& at(int y, int x) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }

  std::size_t size() const { return labels.size(); }

  bool same_shape(const LabelMap& other) const {
    return height == other.height && width == other.width;
  }
};

}  // namespace segmicro
