#include "segmicro/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace segmicro {

namespace {

template <typename T>
void check_conv_params(const Tensor4<T>& input, const ConvParams<T>& params,
                       int expected_in, int out_channels, const char* op) {
  const Shape4& ks = params.kernel.shape();
  if (ks.batch != ks.height) {
    throw ShapeError(std::string(op) + ": kernel must be square, got " +
                     ks.to_string());
  }
  if (input.shape().channels != expected_in) {
    throw ShapeError(std::string(op) + ": channel mismatch, input " +
                     input.shape().to_string() + " vs kernel " +
                     ks.to_string());
  }
  if (static_cast<int>(params.bias.size()) != out_channels) {
    throw ShapeError(std::string(op) + ": bias length " +
                     std::to_string(params.bias.size()) +
                     " does not match output channels " +
                     std::to_string(out_channels));
  }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const ConvParams<T>& params) {
  const Shape4& ks = params.kernel.shape();
  const int kh = ks.batch, kw = ks.height, ic = ks.width, oc = ks.channels;
  check_conv_params(input, params, ic, oc, "conv2d");

  const Shape4& is = input.shape();
  const int pb = same_pad_before(kh);
  Tensor4<T> out({is.batch, is.height, is.width, oc});
  const T* kdata = params.kernel.data();

  for (int b = 0; b < is.batch; ++b) {
    for (int oy = 0; oy < is.height; ++oy) {
      for (int ox = 0; ox < is.width; ++ox) {
        T* op = out.pixel(b, oy, ox);
        for (int co = 0; co < oc; ++co) op[co] = params.bias[co];
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy + ky - pb;
          if (iy < 0 || iy >= is.height) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox + kx - pb;
            if (ix < 0 || ix >= is.width) continue;
            const T* ip = input.pixel(b, iy, ix);
            const T* wtap = kdata + static_cast<std::size_t>(ky * kw + kx) *
                                        ic * oc;
            for (int ci = 0; ci < ic; ++ci) {
              const T v = ip[ci];
              const T* w = wtap + static_cast<std::size_t>(ci) * oc;
              for (int co = 0; co < oc; ++co) op[co] += v * w[co];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input,
                             const ConvParams<T>& params,
                             const Tensor4<T>& upstream) {
  const Shape4& ks = params.kernel.shape();
  const int kh = ks.batch, kw = ks.height, ic = ks.width, oc = ks.channels;
  check_conv_params(input, params, ic, oc, "conv2d_backward");
  const Shape4& is = input.shape();
  const Shape4 expect_up{is.batch, is.height, is.width, oc};
  require_same_shape(upstream.shape(), expect_up, "conv2d_backward upstream");

  const int pb = same_pad_before(kh);
  ConvGrads<T> g;
  g.input = Tensor4<T>(is);
  g.kernel = Tensor4<T>(ks);
  g.bias.assign(oc, T{0});

  const T* kdata = params.kernel.data();
  T* dk = g.kernel.data();

  for (int b = 0; b < is.batch; ++b) {
    for (int oy = 0; oy < is.height; ++oy) {
      for (int ox = 0; ox < is.width; ++ox) {
        const T* up = upstream.pixel(b, oy, ox);
        for (int co = 0; co < oc; ++co) g.bias[co] += up[co];
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy + ky - pb;
          if (iy < 0 || iy >= is.height) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox + kx - pb;
            if (ix < 0 || ix >= is.width) continue;
            const T* ip = input.pixel(b, iy, ix);
            T* dip = g.input.pixel(b, iy, ix);
            const std::size_t tap =
                static_cast<std::size_t>(ky * kw + kx) * ic * oc;
            for (int ci = 0; ci < ic; ++ci) {
              const T v = ip[ci];
              T* dw = dk + tap + static_cast<std::size_t>(ci) * oc;
              const T* w = kdata + tap + static_cast<std::size_t>(ci) * oc;
              T s{0};
              for (int co = 0; co < oc; ++co) {
                dw[co] += v * up[co];
                s += w[co] * up[co];
              }
              dip[ci] += s;
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& input) {
  Tensor4<T> out(input.shape());
  const T* in = input.data();
  T* o = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    o[i] = in[i] > T{0} ? in[i] : T{0};
  }
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& upstream) {
  require_same_shape(input.shape(), upstream.shape(), "relu_backward");
  Tensor4<T> out(input.shape());
  const T* in = input.data();
  const T* up = upstream.data();
  T* o = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    o[i] = in[i] > T{0} ? up[i] : T{0};
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, PoolIndices> maxpool2(const Tensor4<T>& input) {
  const Shape4& is = input.shape();
  const int oh = (is.height + 1) / 2;
  const int ow = (is.width + 1) / 2;
  Tensor4<T> out({is.batch, oh, ow, is.channels});
  PoolIndices idx;
  idx.input_shape = is;
  idx.output_shape = out.shape();
  idx.argmax.assign(out.size(), 0);

  for (int b = 0; b < is.batch; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = 2 * oy;
      const int y1 = std::min(y0 + 2, is.height);
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = 2 * ox;
        const int x1 = std::min(x0 + 2, is.width);
        T* op = out.pixel(b, oy, ox);
        std::int64_t* ap =
            idx.argmax.data() + out.offset(b, oy, ox, 0);
        for (int c = 0; c < is.channels; ++c) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_at = -1;
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) {
              const std::int64_t flat =
                  static_cast<std::int64_t>(input.offset(b, iy, ix, c));
              const T v = input[static_cast<std::size_t>(flat)];
              if (v > best) {
                best = v;
                best_at = flat;
              }
            }
          }
          op[c] = best;
          ap[c] = best_at;
        }
      }
    }
  }
  return {std::move(out), std::move(idx)};
}

template <typename T>
Tensor4<T> maxpool2_backward(const PoolIndices& indices,
                             const Tensor4<T>& upstream) {
  require_same_shape(upstream.shape(), indices.output_shape,
                     "maxpool2_backward upstream");
  Tensor4<T> out(indices.input_shape);
  const T* up = upstream.data();
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    out[static_cast<std::size_t>(indices.argmax[i])] += up[i];
  }
  return out;
}

template <typename T>
Tensor4<T> transposed_conv2d(const Tensor4<T>& input,
                             const ConvParams<T>& params) {
  const Shape4& ks = params.kernel.shape();
  const int kh = ks.batch, kw = ks.height, oc = ks.width, ic = ks.channels;
  check_conv_params(input, params, ic, oc, "transposed_conv2d");

  const Shape4& is = input.shape();
  const int oh = 2 * is.height;
  const int ow = 2 * is.width;
  const int pb = deconv_pad_before(kh);
  Tensor4<T> out({is.batch, oh, ow, oc});
  const T* kdata = params.kernel.data();

  for (int b = 0; b < is.batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        T* op = out.pixel(b, y, x);
        for (int co = 0; co < oc; ++co) op[co] = params.bias[co];
      }
    }
    for (int iy = 0; iy < is.height; ++iy) {
      for (int ix = 0; ix < is.width; ++ix) {
        const T* ip = input.pixel(b, iy, ix);
        for (int ky = 0; ky < kh; ++ky) {
          const int oy = 2 * iy + ky - pb;
          if (oy < 0 || oy >= oh) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ox = 2 * ix + kx - pb;
            if (ox < 0 || ox >= ow) continue;
            T* op = out.pixel(b, oy, ox);
            const T* wtap = kdata + static_cast<std::size_t>(ky * kw + kx) *
                                        oc * ic;
            for (int co = 0; co < oc; ++co) {
              const T* w = wtap + static_cast<std::size_t>(co) * ic;
              T s{0};
              for (int ci = 0; ci < ic; ++ci) s += ip[ci] * w[ci];
              op[co] += s;
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> transposed_conv2d_backward(const Tensor4<T>& input,
                                        const ConvParams<T>& params,
                                        const Tensor4<T>& upstream) {
  const Shape4& ks = params.kernel.shape();
  const int kh = ks.batch, kw = ks.height, oc = ks.width, ic = ks.channels;
  check_conv_params(input, params, ic, oc, "transposed_conv2d_backward");
  const Shape4& is = input.shape();
  const Shape4 expect_up{is.batch, 2 * is.height, 2 * is.width, oc};
  require_same_shape(upstream.shape(), expect_up,
                     "transposed_conv2d_backward upstream");

  const int pb = deconv_pad_before(kh);
  ConvGrads<T> g;
  g.input = Tensor4<T>(is);
  g.kernel = Tensor4<T>(ks);
  g.bias.assign(oc, T{0});

  const T* up_all = upstream.data();
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    g.bias[i % oc] += up_all[i];
  }

  const T* kdata = params.kernel.data();
  T* dk = g.kernel.data();
  for (int b = 0; b < is.batch; ++b) {
    for (int iy = 0; iy < is.height; ++iy) {
      for (int ix = 0; ix < is.width; ++ix) {
        const T* ip = input.pixel(b, iy, ix);
        T* dip = g.input.pixel(b, iy, ix);
        for (int ky = 0; ky < kh; ++ky) {
          const int oy = 2 * iy + ky - pb;
          if (oy < 0 || oy >= expect_up.height) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ox = 2 * ix + kx - pb;
            if (ox < 0 || ox >= expect_up.width) continue;
            const T* up = upstream.pixel(b, oy, ox);
            const std::size_t tap =
                static_cast<std::size_t>(ky * kw + kx) * oc * ic;
            for (int co = 0; co < oc; ++co) {
              const T v = up[co];
              const T* w = kdata + tap + static_cast<std::size_t>(co) * ic;
              T* dw = dk + tap + static_cast<std::size_t>(co) * ic;
              for (int ci = 0; ci < ic; ++ci) {
                dw[ci] += v * ip[ci];
                dip[ci] += v * w[ci];
              }
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  const Shape4& as = a.shape();
  const Shape4& bs = b.shape();
  if (as.batch != bs.batch || as.height != bs.height || as.width != bs.width) {
    throw ShapeError("concat_channels: spatial mismatch, " + as.to_string() +
                     " vs " + bs.to_string());
  }
  Tensor4<T> out({as.batch, as.height, as.width, as.channels + bs.channels});
  for (int bi = 0; bi < as.batch; ++bi) {
    for (int y = 0; y < as.height; ++y) {
      for (int x = 0; x < as.width; ++x) {
        T* op = out.pixel(bi, y, x);
        std::memcpy(op, a.pixel(bi, y, x), sizeof(T) * as.channels);
        std::memcpy(op + as.channels, b.pixel(bi, y, x),
                    sizeof(T) * bs.channels);
      }
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> concat_channels_backward(
    const Tensor4<T>& upstream, int a_channels) {
  const Shape4& us = upstream.shape();
  if (a_channels < 1 || a_channels >= us.channels) {
    throw ShapeError("concat_channels_backward: a_channels " +
                     std::to_string(a_channels) + " out of range for " +
                     us.to_string());
  }
  const int b_channels = us.channels - a_channels;
  Tensor4<T> ga({us.batch, us.height, us.width, a_channels});
  Tensor4<T> gb({us.batch, us.height, us.width, b_channels});
  for (int bi = 0; bi < us.batch; ++bi) {
    for (int y = 0; y < us.height; ++y) {
      for (int x = 0; x < us.width; ++x) {
        const T* up = upstream.pixel(bi, y, x);
        std::memcpy(ga.pixel(bi, y, x), up, sizeof(T) * a_channels);
        std::memcpy(gb.pixel(bi, y, x), up + a_channels,
                    sizeof(T) * b_channels);
      }
    }
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits) {
  const T* in = logits.data();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(static_cast<double>(in[i]))) {
      throw NumericError("softmax_channels: non-finite logit at flat index " +
                         std::to_string(i));
    }
  }
  const Shape4& s = logits.shape();
  Tensor4<T> out(s);
  const int c = s.channels;
  const std::size_t pixels = logits.size() / static_cast<std::size_t>(c);
  T* o = out.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* lp = in + p * c;
    T* op = o + p * c;
    T m = lp[0];
    for (int k = 1; k < c; ++k) m = std::max(m, lp[k]);
    T sum{0};
    for (int k = 0; k < c; ++k) {
      op[k] = std::exp(lp[k] - m);
      sum += op[k];
    }
    const T inv = T{1} / sum;
    for (int k = 0; k < c; ++k) op[k] *= inv;
  }
  return out;
}

template <typename T>
Tensor4<T> softmax_channels_backward(const Tensor4<T>& probs,
                                     const Tensor4<T>& upstream) {
  require_same_shape(probs.shape(), upstream.shape(),
                     "softmax_channels_backward");
  const int c = probs.shape().channels;
  Tensor4<T> out(probs.shape());
  const T* p = probs.data();
  const T* up = upstream.data();
  T* o = out.data();
  const std::size_t pixels = probs.size() / static_cast<std::size_t>(c);
  for (std::size_t i = 0; i < pixels; ++i) {
    const T* pp = p + i * c;
    const T* gp = up + i * c;
    T dot{0};
    for (int k = 0; k < c; ++k) dot += pp[k] * gp[k];
    T* op = o + i * c;
    for (int k = 0; k < c; ++k) op[k] = pp[k] * (gp[k] - dot);
  }
  return out;
}

#define SEGMICRO_INSTANTIATE_OPS(T)                                          \
  template Tensor4<T> conv2d(const Tensor4<T>&, const ConvParams<T>&);      \
  template ConvGrads<T> conv2d_backward(const Tensor4<T>&,                  \
                                        const ConvParams<T>&,               \
                                        const Tensor4<T>&);                 \
  template Tensor4<T> relu(const Tensor4<T>&);                              \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);  \
  template std::pair<Tensor4<T>, PoolIndices> maxpool2(const Tensor4<T>&);  \
  template Tensor4<T> maxpool2_backward(const PoolIndices&,                 \
                                        const Tensor4<T>&);                 \
  template Tensor4<T> transposed_conv2d(const Tensor4<T>&,                  \
                                        const ConvParams<T>&);              \
  template ConvGrads<T> transposed_conv2d_backward(const Tensor4<T>&,       \
                                                   const ConvParams<T>&,    \
                                                   const Tensor4<T>&);      \
  template Tensor4<T> concat_channels(const Tensor4<T>&, const Tensor4<T>&); \
  template std::pair<Tensor4<T>, Tensor4<T>> concat_channels_backward(      \
      const Tensor4<T>&, int);                                              \
  template Tensor4<T> softmax_channels(const Tensor4<T>&);                  \
  template Tensor4<T> softmax_channels_backward(const Tensor4<T>&,          \
                                                const Tensor4<T>&);

SEGMICRO_INSTANTIATE_OPS(float)
SEGMICRO_INSTANTIATE_OPS(double)

#undef SEGMICRO_INSTANTIATE_OPS

}  // namespace segmicro
