#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segmicro/augment.hpp"
#include "segmicro/labelmap.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro {

// One image/mask pair. `valid_height/width` bound the unpadded region for
// samples that were zero-padded to a divisible size (0 = the full frame);
// metrics are computed inside that region only.
struct Sample {
  Tensor4<float> image;  // (1, H, W, num_channels), values in [0, 1]
  LabelMap mask;
  std::string id;
  int valid_height = 0;
  int valid_width = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  int num_channels = 0;
  std::string note;

  std::size_t size() const { return samples.size(); }
};

// Merges binary cell and nucleus masks into {0 background, 1 cells,
// 2 nuclei}; nuclei win where both are set.
LabelMap combine_masks(const LabelMap& cells, const LabelMap& nuclei);

// BRATS label remap {0,1,2,4} -> {0,1,2,3}.
LabelMap remap_labels(const LabelMap& mask);

// Stacks four normalized modality slices in the fixed order (t1, t1ce, t2,
// flair); spatial dims are zero-padded up to the next multiple of 16.
Tensor4<float> stack_modalities(const Tensor4<float>& t1,
                                const Tensor4<float>& t1ce,
                                const Tensor4<float>& t2,
                                const Tensor4<float>& flair);

// Expands every original into `multiplier` samples: one preprocessed copy
// (optional equalization, scale to the policy target) followed by
// multiplier-1 stochastic transforms with per-sample seeds seed + index.
Dataset generate_dataset(const Dataset& originals, const AugmentPolicy& policy,
                         int multiplier, std::uint64_t seed);

// Shuffled split with ceil(fraction * N) validation samples.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double fraction,
                                            std::uint64_t seed);

// PNG image (8/16-bit grayscale) or raw slice, plus a PNG (paletted or
// grayscale, value = class) or raw mask.
Sample read_sample(const std::string& image_path, const std::string& mask_path,
                   int num_classes);
void write_sample(const Sample& sample, const std::string& image_path,
                  const std::string& mask_path);

// JSON manifest: {"schema":1, "num_classes":N, "num_channels":C,
// "samples":[{"id","image","mask"}...]} with paths relative to the manifest.
Dataset read_manifest(const std::string& manifest_path);
void write_manifest(const std::string& manifest_path, const Dataset& dataset,
                    const std::vector<std::pair<std::string, std::string>>&
                        relative_paths);

// Writes every sample (images/<id>.png + masks/<id>.png, or .raw for
// multi-channel data) plus manifest.json under out_dir. Returns the manifest
// path.
std::string write_dataset(const Dataset& dataset, const std::string& out_dir);

}  // namespace segmicro
