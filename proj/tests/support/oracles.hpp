#pragma once

// Independent reference implementations used to check the optimized kernels.
// Everything here is written straight from the operation definitions and
// stays free of the production loop structure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "segmicro/labelmap.hpp"
#include "segmicro/ops.hpp"
#include "segmicro/rng.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro::test {

// Quadruple-nested-loop "same" convolution, directly from the definition.
template <typename T>
Tensor4<T> conv2d_bruteforce(const Tensor4<T>& input,
                             const ConvParams<T>& params) {
  const Shape4& is = input.shape();
  const Shape4& ks = params.kernel.shape();
  const int k = ks.batch;
  const int ic = ks.width;
  const int oc = ks.channels;
  const int pad = (k - 1) / 2;

  Tensor4<T> out({is.batch, is.height, is.width, oc});
  for (int b = 0; b < is.batch; ++b) {
    for (int oy = 0; oy < is.height; ++oy) {
      for (int ox = 0; ox < is.width; ++ox) {
        for (int co = 0; co < oc; ++co) {
          T acc = params.bias[co];
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy + ky - pad;
              const int ix = ox + kx - pad;
              if (iy < 0 || iy >= is.height || ix < 0 || ix >= is.width) {
                continue;
              }
              for (int ci = 0; ci < ic; ++ci) {
                acc += input.at(b, iy, ix, ci) *
                       params.kernel.at(ky, kx, ci, co);
              }
            }
          }
          out.at(b, oy, ox, co) = acc;
        }
      }
    }
  }
  return out;
}

// Zero-stuffing route for the stride-2 transposed convolution: stuff the
// input by 2, pad by k-1, run conv2d with the spatially flipped (and
// reoriented) kernel, then crop and add the bias.
template <typename T>
Tensor4<T> transposed_conv2d_zerostuff(const Tensor4<T>& input,
                                       const ConvParams<T>& params) {
  const Shape4& is = input.shape();
  const Shape4& ks = params.kernel.shape();
  const int k = ks.batch;
  const int oc = ks.width;      // scatter orientation: (kh, kw, oc, ic)
  const int ic = ks.channels;
  const int pad_b = deconv_pad_before(k);
  const int pad_conv = (k - 1) / 2;

  // Input values land on even coordinates of a padded canvas.
  const int canvas_h = 2 * is.height + 2 * (k - 1);
  const int canvas_w = 2 * is.width + 2 * (k - 1);
  Tensor4<T> stuffed({is.batch, canvas_h, canvas_w, ic});
  for (int b = 0; b < is.batch; ++b) {
    for (int y = 0; y < is.height; ++y) {
      for (int x = 0; x < is.width; ++x) {
        for (int c = 0; c < ic; ++c) {
          stuffed.at(b, 2 * y + (k - 1), 2 * x + (k - 1), c) =
              input.at(b, y, x, c);
        }
      }
    }
  }

  ConvParams<T> flipped;
  flipped.kernel = Tensor4<T>({k, k, ic, oc});
  flipped.bias.assign(oc, T{0});
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      for (int co = 0; co < oc; ++co) {
        for (int ci = 0; ci < ic; ++ci) {
          flipped.kernel.at(ky, kx, ci, co) =
              params.kernel.at(k - 1 - ky, k - 1 - kx, co, ci);
        }
      }
    }
  }

  const Tensor4<T> full = conv2d(stuffed, flipped);
  const int crop = pad_b + pad_conv;
  Tensor4<T> out({is.batch, 2 * is.height, 2 * is.width, oc});
  for (int b = 0; b < is.batch; ++b) {
    for (int y = 0; y < 2 * is.height; ++y) {
      for (int x = 0; x < 2 * is.width; ++x) {
        for (int c = 0; c < oc; ++c) {
          out.at(b, y, x, c) = full.at(b, y + crop, x + crop, c) +
                               params.bias[c];
        }
      }
    }
  }
  return out;
}

// Global confusion tally over pooled pixels.
struct ConfusionCounts {
  std::vector<std::int64_t> tp, fp, fn;
  std::int64_t correct = 0;
  std::int64_t total = 0;
};

inline ConfusionCounts confusion_tally(const std::vector<LabelMap>& preds,
                                       const std::vector<LabelMap>& truths,
                                       int num_classes) {
  ConfusionCounts c;
  c.tp.assign(num_classes, 0);
  c.fp.assign(num_classes, 0);
  c.fn.assign(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < preds[i].size(); ++j) {
      const int p = preds[i].labels[j];
      const int t = truths[i].labels[j];
      c.total += 1;
      if (p == t) c.correct += 1;
      for (int cls = 0; cls < num_classes; ++cls) {
        const bool in_p = p == cls;
        const bool in_t = t == cls;
        if (in_p && in_t) c.tp[cls] += 1;
        if (in_p && !in_t) c.fp[cls] += 1;
        if (!in_p && in_t) c.fn[cls] += 1;
      }
    }
  }
  return c;
}

// Central finite differences of a scalar functional over a tensor argument.
template <typename T>
Tensor4<T> fd_gradient(const Tensor4<T>& x,
                       const std::function<double(const Tensor4<T>&)>& f,
                       double step = 1e-4) {
  Tensor4<T> grad(x.shape());
  Tensor4<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = probe[i];
    probe[i] = saved + static_cast<T>(step);
    const double plus = f(probe);
    probe[i] = saved - static_cast<T>(step);
    const double minus = f(probe);
    probe[i] = saved;
    grad[i] = static_cast<T>((plus - minus) / (2.0 * step));
  }
  return grad;
}

// |a - n| scaled by max(|a|, |n|, floor).
inline double rel_err(double a, double n, double floor_scale = 1e-4) {
  const double scale = std::max({std::abs(a), std::abs(n), floor_scale});
  return std::abs(a - n) / scale;
}

template <typename T>
double max_rel_err(const Tensor4<T>& analytic, const Tensor4<T>& numeric,
                   double floor_scale = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, rel_err(static_cast<double>(analytic[i]),
                                    static_cast<double>(numeric[i]),
                                    floor_scale));
  }
  return worst;
}

// Random helpers shared by the suites.
template <typename T>
Tensor4<T> random_tensor(Shape4 shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  Tensor4<T> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(rng.uniform(lo, hi));
  }
  return out;
}

template <typename T>
ConvParams<T> random_conv_params(int k, int in_ch, int out_ch, Rng& rng) {
  ConvParams<T> p;
  p.kernel = random_tensor<T>({k, k, in_ch, out_ch}, rng);
  p.bias.resize(out_ch);
  for (auto& b : p.bias) b = static_cast<T>(rng.uniform(-0.5, 0.5));
  return p;
}

// Deconv orientation: (kh, kw, out_ch, in_ch).
template <typename T>
ConvParams<T> random_deconv_params(int k, int in_ch, int out_ch, Rng& rng) {
  ConvParams<T> p;
  p.kernel = random_tensor<T>({k, k, out_ch, in_ch}, rng);
  p.bias.resize(out_ch);
  for (auto& b : p.bias) b = static_cast<T>(rng.uniform(-0.5, 0.5));
  return p;
}

}  // namespace segmicro::test
