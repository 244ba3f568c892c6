#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segmicro/graph.hpp"

namespace segmicro {

struct LayerCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  // Probe pairs that flipped a ReLU state or pool argmax straddle a kink;
  // the loss is not differentiable there and the comparison is skipped.
  std::size_t coords_skipped = 0;
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool passed = false;

  std::string to_string() const;
};

// |a - n| / max(|a|, |n|, 1e-4): relative for healthy magnitudes, absolute
// near zero.
double gradcheck_relative_error(double analytic, double numeric);

// Compares analytic parameter gradients of the cross-entropy loss against
// central finite differences (step 1e-4) at f64. Checks every coordinate of
// layers up to max_coords_per_layer, otherwise a seeded random subset.
GradCheckReport gradcheck_graph(Graph<double>& graph,
                                const Tensor4<double>& input,
                                const Tensor4<double>& targets,
                                double tolerance, int max_coords_per_layer,
                                std::uint64_t seed);

}  // namespace segmicro
