#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "segmicro/labelmap.hpp"
#include "segmicro/rng.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro {

// Probabilities and ranges of the stochastic transform pipeline. Defaults are
// the light-microscopy settings; BRATS uses max_rotation_deg 20 and zoom
// range (0.9, 1.1).
struct AugmentPolicy {
  double flip_prob = 0.5;
  double warp_prob = 0.5;
  std::pair<double, double> warp_amplitude{10.0, 50.0};
  std::pair<double, double> warp_frequency{0.5, 2.0};
  double max_rotation_deg = 60.0;
  std::pair<double, double> zoom_range{0.8, 1.2};
  int target_height = 0;  // 0 keeps the input size
  int target_width = 0;
  bool equalize = true;

  void validate() const;
};

// Images are single-batch (1, H, W, C) tensors; masks are LabelMaps of the
// same spatial shape. Geometric ops move both identically; image resampling
// is bilinear, mask resampling nearest-neighbor, and vacated pixels are
// filled with 0 (image) / background label 0 (mask).

// 8-bit and 16-bit normalization to [0, 1].
float normalize_u8(std::uint8_t v);
float normalize_u16(std::uint16_t v);

// Per-image min-max normalization for open-range sources. A constant image
// maps to all zeros.
Tensor4<float> normalize_minmax(const Tensor4<float>& image);

// Histogram equalization of a single-channel [0,1] image via the standard
// CDF remap with 256 bins: out = (CDF(bin(x)) - CDF_min) / (1 - CDF_min).
// A constant image is returned unchanged.
Tensor4<float> equalize(const Tensor4<float>& image, int bins = 256);

// Bilinear / nearest resampling to a new spatial size (centers aligned).
Tensor4<float> resize_bilinear(const Tensor4<float>& image, int out_height,
                               int out_width);
LabelMap resize_nearest(const LabelMap& mask, int out_height, int out_width);

// Two independent Bernoulli(prob) draws: mirror columns, then mirror rows.
std::pair<Tensor4<float>, LabelMap> flip(const Tensor4<float>& image,
                                         const LabelMap& mask, Rng& rng,
                                         double prob);

// Scanline shift of the sine warp: int(A * (sin(f * pi * i / 180) + 1) / 2).
int warp_offset(double amplitude, double frequency, int index);

// Sine warp. Draw order: apply-horizontal?, apply-vertical?, A, f (A and f
// are always drawn so the stream length is fixed). The horizontal pass
// shifts row i right by warp_offset(i); the vertical pass shifts column j
// down by warp_offset(j). Pixels are relocated without interpolation.
std::pair<Tensor4<float>, LabelMap> warp(const Tensor4<float>& image,
                                         const LabelMap& mask, Rng& rng,
                                         const AugmentPolicy& policy);

// Rotation about the image center by a fixed angle in degrees.
std::pair<Tensor4<float>, LabelMap> rotate_by(const Tensor4<float>& image,
                                              const LabelMap& mask,
                                              double angle_deg);

// Rotation by an angle drawn uniformly from [-max_deg, +max_deg].
std::pair<Tensor4<float>, LabelMap> rotate(const Tensor4<float>& image,
                                           const LabelMap& mask, Rng& rng,
                                           double max_deg);

// Scales by a factor drawn from zoom_range, then center-crops or center-pads
// back to exactly (target_height, target_width).
std::pair<Tensor4<float>, LabelMap> zoom_crop(
    const Tensor4<float>& image, const LabelMap& mask, Rng& rng,
    std::pair<double, double> zoom_range, int target_height, int target_width);

// Full stochastic pipeline: (scale to target) -> flip -> warp -> rotate ->
// zoom -> (crop), with one seeded stream driving all draws in the order
// flip-h, flip-v, warp-h, warp-v, A, f, angle, z.
std::pair<Tensor4<float>, LabelMap> transform(const Tensor4<float>& image,
                                              const LabelMap& mask,
                                              const AugmentPolicy& policy,
                                              std::uint64_t seed);

}  // namespace segmicro
