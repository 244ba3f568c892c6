#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segmicro/labelmap.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro {

// Pooled evaluation results over a sample set.
struct MetricsReport {
  double test_accuracy = 0.0;
  std::map<int, double> per_class_dice;  // class index -> Dice, all classes
  std::int64_t sample_count = 0;

  // Flat JSON document: accuracy, dice.<class> for each foreground class,
  // samples.
  std::string to_json() const;
};

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Tensor4<T> grad;  // w.r.t. the pre-softmax logits: (p - y) / pixel count
};

// Mean categorical cross-entropy over all pixels of the batch, plus the fused
// softmax gradient. `targets` must be one-hot along the channel axis.
template <typename T>
LossAndGrad<T> cross_entropy(const Tensor4<T>& probs,
                             const Tensor4<T>& targets);

// Fraction of pixels whose labels agree.
double pixel_accuracy(const LabelMap& pred, const LabelMap& truth);

// Dice coefficient 2TP / (2TP + FP + FN) of the class-id binarizations.
// A class absent from both maps scores 1.0.
double dice(const LabelMap& pred, const LabelMap& truth, int class_id);

// Per-class Dice and accuracy pooled over the pixels of all sample pairs
// (global confusion counts). `per_image_average` switches to the mean of
// per-image scores instead.
MetricsReport dice_report(const std::vector<LabelMap>& preds,
                          const std::vector<LabelMap>& truths,
                          int num_classes, bool per_image_average = false);

// One-hot encoding of a label map as a single-sample tensor.
template <typename T>
Tensor4<T> one_hot(const LabelMap& mask, int num_classes);

}  // namespace segmicro
