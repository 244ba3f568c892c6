#include "segmicro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace segmicro {

namespace {

constexpr double kLogEpsilon = 1e-12;  // keeps log(p) finite at p = 0

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_json() const {
  std::string out = "{\n";
  out += "  \"accuracy\": " + format_double(test_accuracy) + ",\n";
  for (const auto& [cls, value] : per_class_dice) {
    if (cls == 0) continue;  // background is not reported
    out += "  \"dice." + std::to_string(cls) + "\": " + format_double(value) +
           ",\n";
  }
  out += "  \"samples\": " + std::to_string(sample_count) + "\n}\n";
  return out;
}

template <typename T>
LossAndGrad<T> cross_entropy(const Tensor4<T>& probs,
                             const Tensor4<T>& targets) {
  require_same_shape(probs.shape(), targets.shape(), "cross_entropy");
  const Shape4& s = probs.shape();
  const int c = s.channels;
  const std::int64_t pixel_count =
      static_cast<std::int64_t>(s.batch) * s.height * s.width;

  const T* p = probs.data();
  const T* y = targets.data();
  for (std::int64_t px = 0; px < pixel_count; ++px) {
    double prob_sum = 0.0;
    double target_sum = 0.0;
    int ones = 0;
    for (int k = 0; k < c; ++k) {
      const double pv = static_cast<double>(p[px * c + k]);
      const double yv = static_cast<double>(y[px * c + k]);
      prob_sum += pv;
      target_sum += yv;
      if (yv == 1.0) ++ones;
      if (yv != 0.0 && yv != 1.0) {
        throw DataError("cross_entropy: targets must be one-hot, pixel " +
                        std::to_string(px) + " has value " +
                        std::to_string(yv));
      }
    }
    if (std::abs(prob_sum - 1.0) > 1e-5) {
      throw DataError("cross_entropy: probabilities of pixel " +
                      std::to_string(px) + " sum to " +
                      std::to_string(prob_sum));
    }
    if (ones != 1 || target_sum != 1.0) {
      throw DataError("cross_entropy: pixel " + std::to_string(px) +
                      " target is not one-hot");
    }
  }

  LossAndGrad<T> out;
  out.grad = Tensor4<T>(s);
  T* g = out.grad.data();
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(pixel_count));
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (y[i] != T{0}) {
      loss -= std::log(static_cast<double>(p[i]) + kLogEpsilon);
    }
    g[i] = (p[i] - y[i]) * inv_n;
  }
  out.loss = loss / static_cast<double>(pixel_count);
  return out;
}

double pixel_accuracy(const LabelMap& pred, const LabelMap& truth) {
  if (!pred.same_shape(truth)) {
    throw ShapeError("pixel_accuracy: map shapes differ, " +
                     std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs " +
                     std::to_string(truth.height) + "x" +
                     std::to_string(truth.width));
  }
  std::int64_t equal = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    equal += pred.labels[i] == truth.labels[i];
  }
  return static_cast<double>(equal) / static_cast<double>(pred.size());
}

double dice(const LabelMap& pred, const LabelMap& truth, int class_id) {
  if (!pred.same_shape(truth)) {
    throw ShapeError("dice: map shapes differ");
  }
  const int classes = std::max(pred.num_classes, truth.num_classes);
  if (class_id < 0 || (classes > 0 && class_id >= classes)) {
    throw DomainError("dice: class id " + std::to_string(class_id) +
                      " outside [0, " + std::to_string(classes) + ")");
  }
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool in_pred = pred.labels[i] == class_id;
    const bool in_truth = truth.labels[i] == class_id;
    tp += in_pred && in_truth;
    fp += in_pred && !in_truth;
    fn += !in_pred && in_truth;
  }
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) /
         static_cast<double>(2 * tp + fp + fn);
}

MetricsReport dice_report(const std::vector<LabelMap>& preds,
                          const std::vector<LabelMap>& truths,
                          int num_classes, bool per_image_average) {
  if (preds.size() != truths.size()) {
    throw ShapeError("dice_report: " + std::to_string(preds.size()) +
                     " predictions vs " + std::to_string(truths.size()) +
                     " truths");
  }
  if (per_image_average) {
    MetricsReport report;
    report.sample_count = static_cast<std::int64_t>(preds.size());
    if (preds.empty()) return report;
    for (int c = 0; c < num_classes; ++c) report.per_class_dice[c] = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      report.test_accuracy += pixel_accuracy(preds[i], truths[i]);
      for (int c = 0; c < num_classes; ++c) {
        report.per_class_dice[c] += dice(preds[i], truths[i], c);
      }
    }
    const double inv = 1.0 / static_cast<double>(preds.size());
    report.test_accuracy *= inv;
    for (auto& [cls, value] : report.per_class_dice) value *= inv;
    return report;
  }
  std::vector<std::int64_t> tp(num_classes, 0), fp(num_classes, 0),
      fn(num_classes, 0);
  std::int64_t equal = 0, total = 0;

  for (std::size_t i = 0; i < preds.size(); ++i) {
    const LabelMap& p = preds[i];
    const LabelMap& t = truths[i];
    if (!p.same_shape(t)) {
      throw ShapeError("dice_report: sample " + std::to_string(i) +
                       " map shapes differ");
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const int pv = p.labels[j];
      const int tv = t.labels[j];
      if (pv == tv) {
        ++equal;
        tp[pv] += 1;
      } else {
        fp[pv] += 1;
        fn[tv] += 1;
      }
    }
    total += static_cast<std::int64_t>(p.size());
  }

  MetricsReport report;
  report.sample_count = static_cast<std::int64_t>(preds.size());
  report.test_accuracy =
      total > 0 ? static_cast<double>(equal) / static_cast<double>(total)
                : 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t denom = 2 * tp[c] + fp[c] + fn[c];
    report.per_class_dice[c] =
        denom == 0 ? 1.0
                   : 2.0 * static_cast<double>(tp[c]) /
                         static_cast<double>(denom);
  }
  return report;
}

template <typename T>
Tensor4<T> one_hot(const LabelMap& mask, int num_classes) {
  Tensor4<T> out({1, mask.height, mask.width, num_classes});
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const int cls = mask.at(y, x);
      if (cls >= num_classes) {
        throw DataError("one_hot: label " + std::to_string(cls) +
                        " >= num_classes " + std::to_string(num_classes));
      }
      out.at(0, y, x, cls) = T{1};
    }
  }
  return out;
}

template LossAndGrad<float> cross_entropy(const Tensor4<float>&,
                                          const Tensor4<float>&);
template LossAndGrad<double> cross_entropy(const Tensor4<double>&,
                                           const Tensor4<double>&);
template Tensor4<float> one_hot(const LabelMap&, int);
template Tensor4<double> one_hot(const LabelMap&, int);

}  // namespace segmicro
