#include "segmicro/graph.hpp"

#include <cmath>

#include "segmicro/rng.hpp"

namespace segmicro {

std::string arch_name(Arch arch) {
  return arch == Arch::Fcn ? "fcn" : "unet";
}

Arch arch_from_name(const std::string& name) {
  if (name == "fcn") return Arch::Fcn;
  if (name == "unet") return Arch::UNet;
  throw ConfigError("unknown architecture '" + name + "' (expected fcn|unet)");
}

void ModelConfig::validate() const {
  if (num_channels < 1) {
    throw ConfigError("model.num_channels must be >= 1, got " +
                      std::to_string(num_channels));
  }
  if (num_classes < 2) {
    throw ConfigError("model.num_classes must be >= 2, got " +
                      std::to_string(num_classes));
  }
  if (conv_kernel < 1) {
    throw ConfigError("model.conv_kernel must be >= 1, got " +
                      std::to_string(conv_kernel));
  }
  if (out_kernel < 1) {
    throw ConfigError("model.out_kernel must be >= 1, got " +
                      std::to_string(out_kernel));
  }
  if (pool_size != 2) {
    throw ConfigError("model.pool_size is fixed at 2, got " +
                      std::to_string(pool_size));
  }
  if (arch == Arch::Fcn) {
    if (filters.size() < 3) {
      throw ConfigError("model.filters needs at least 3 entries for the FCN, "
                        "got " + std::to_string(filters.size()));
    }
  } else {
    if (filters.size() != 5) {
      throw ConfigError("model.filters needs exactly 5 entries for the U-Net, "
                        "got " + std::to_string(filters.size()));
    }
    if (deconv_kernel < 1) {
      throw ConfigError("model.deconv_kernel must be >= 1, got " +
                        std::to_string(deconv_kernel));
    }
    if (deconv_stride != 2) {
      throw ConfigError("model.deconv_stride is fixed at 2, got " +
                        std::to_string(deconv_stride));
    }
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] < 1) {
      throw ConfigError("model.filters[" + std::to_string(i) +
                        "] must be >= 1, got " + std::to_string(filters[i]));
    }
  }
}

namespace {

// He-uniform fan-in initialization; biases start at zero. The draw stream is
// seeded per layer so a layer's initial weights depend only on (seed, layer
// index, shape).
template <typename T>
void init_kernel(Tensor4<T>& kernel, int fan_in, std::uint64_t layer_seed) {
  Rng rng(layer_seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  T* w = kernel.data();
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    w[i] = static_cast<T>(rng.uniform(-limit, limit));
  }
}

template <typename T>
void accumulate(Tensor4<T>& dst, const Tensor4<T>& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  require_same_shape(dst.shape(), src.shape(), "gradient accumulation");
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

template <typename T>
std::vector<std::span<const T>> Gradients<T>::spans() const {
  std::vector<std::span<const T>> out;
  out.reserve(kernel.size() * 2);
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    out.emplace_back(kernel[i].data(), kernel[i].size());
    out.emplace_back(bias[i].data(), bias[i].size());
  }
  return out;
}

template <typename T>
void Graph<T>::add_conv(int in_channels, int out_channels, int kernel,
                        bool relu, const std::string& name,
                        std::uint64_t seed) {
  ConvParams<T> p;
  p.kernel = Tensor4<T>({kernel, kernel, in_channels, out_channels});
  p.bias.assign(out_channels, T{0});
  init_kernel(p.kernel, kernel * kernel * in_channels,
              mix_seed(seed, params_.size()));

  LayerSpec spec;
  spec.kind = LayerKind::Conv;
  spec.input_slot = static_cast<int>(layers_.size());
  spec.param_index = static_cast<int>(params_.size());
  spec.relu = relu;
  spec.name = name;
  layers_.push_back(spec);
  params_.push_back(std::move(p));
  param_names_.push_back(name);
}

template <typename T>
void Graph<T>::add_deconv(int in_channels, int out_channels, int kernel,
                          const std::string& name, std::uint64_t seed) {
  ConvParams<T> p;
  p.kernel = Tensor4<T>({kernel, kernel, out_channels, in_channels});
  p.bias.assign(out_channels, T{0});
  init_kernel(p.kernel, kernel * kernel * in_channels,
              mix_seed(seed, params_.size()));

  LayerSpec spec;
  spec.kind = LayerKind::Deconv;
  spec.input_slot = static_cast<int>(layers_.size());
  spec.param_index = static_cast<int>(params_.size());
  spec.name = name;
  layers_.push_back(spec);
  params_.push_back(std::move(p));
  param_names_.push_back(name);
}

template <typename T>
Graph<T> Graph<T>::build_fcn(const ModelConfig& config, std::uint64_t seed) {
  if (config.arch != Arch::Fcn) {
    throw ConfigError("build_fcn called with arch '" +
                      arch_name(config.arch) + "'");
  }
  config.validate();

  Graph g;
  g.config_ = config;
  int in_ch = config.num_channels;
  for (std::size_t i = 0; i < config.filters.size(); ++i) {
    g.add_conv(in_ch, config.filters[i], config.conv_kernel, true,
               "conv_" + std::to_string(i + 1), seed);
    in_ch = config.filters[i];
  }
  g.add_conv(in_ch, config.num_classes, config.out_kernel, false, "out", seed);

  LayerSpec softmax;
  softmax.kind = LayerKind::Softmax;
  softmax.input_slot = static_cast<int>(g.layers_.size());
  softmax.name = "softmax";
  g.layers_.push_back(softmax);
  return g;
}

template <typename T>
Graph<T> Graph<T>::build_unet(const ModelConfig& config, std::uint64_t seed) {
  if (config.arch != Arch::UNet) {
    throw ConfigError("build_unet called with arch '" +
                      arch_name(config.arch) + "'");
  }
  config.validate();

  Graph g;
  g.config_ = config;
  const auto& f = config.filters;
  const int k = config.conv_kernel;

  // Encoder: double conv per level, pool between levels 1-4 and 5.
  int in_ch = config.num_channels;
  int skip_slot[4];
  for (int level = 0; level < 4; ++level) {
    const std::string n = std::to_string(level + 1);
    g.add_conv(in_ch, f[level], k, true, "conv_" + n + "a", seed);
    g.add_conv(f[level], f[level], k, true, "conv_" + n + "b", seed);
    skip_slot[level] = static_cast<int>(g.layers_.size());

    LayerSpec pool;
    pool.kind = LayerKind::MaxPool;
    pool.input_slot = static_cast<int>(g.layers_.size());
    pool.name = "pool_" + n;
    g.layers_.push_back(pool);
    in_ch = f[level];
  }
  g.add_conv(in_ch, f[4], k, true, "conv_5a", seed);
  g.add_conv(f[4], f[4], k, true, "conv_5b", seed);
  in_ch = f[4];

  // Decoder: deconv up to the mirror level, concatenate with its skip
  // (upsampled tensor first), then double conv.
  for (int level = 3; level >= 0; --level) {
    const std::string n = std::to_string(6 + (3 - level));
    g.add_deconv(in_ch, f[level], config.deconv_kernel, "up_" + n, seed);

    LayerSpec cat;
    cat.kind = LayerKind::Concat;
    cat.input_slot = static_cast<int>(g.layers_.size());
    cat.skip_slot = skip_slot[level];
    cat.name = "concat_" + n;
    g.layers_.push_back(cat);

    g.add_conv(2 * f[level], f[level], k, true, "conv_" + n + "a", seed);
    g.add_conv(f[level], f[level], k, true, "conv_" + n + "b", seed);
    in_ch = f[level];
  }

  g.add_conv(in_ch, config.num_classes, config.out_kernel, false, "out", seed);

  LayerSpec softmax;
  softmax.kind = LayerKind::Softmax;
  softmax.input_slot = static_cast<int>(g.layers_.size());
  softmax.name = "softmax";
  g.layers_.push_back(softmax);
  return g;
}

template <typename T>
Graph<T> Graph<T>::build(const ModelConfig& config, std::uint64_t seed) {
  return config.arch == Arch::Fcn ? build_fcn(config, seed)
                                  : build_unet(config, seed);
}

template <typename T>
std::int64_t Graph<T>::param_count() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += p.learnable_count();
  return total;
}

template <typename T>
std::vector<std::span<T>> Graph<T>::param_spans() {
  std::vector<std::span<T>> out;
  out.reserve(params_.size() * 2);
  for (auto& p : params_) {
    out.emplace_back(p.kernel.data(), p.kernel.size());
    out.emplace_back(p.bias.data(), p.bias.size());
  }
  return out;
}

template <typename T>
Tensor4<T> Graph<T>::forward(const Tensor4<T>& batch) {
  const Shape4& s = batch.shape();
  if (s.channels != config_.num_channels) {
    throw ShapeError("forward: input has " + std::to_string(s.channels) +
                     " channels, model expects " +
                     std::to_string(config_.num_channels));
  }
  if (config_.arch == Arch::UNet &&
      (s.height % 16 != 0 || s.width % 16 != 0)) {
    throw ShapeError("forward: U-Net input spatial dims must be divisible by "
                     "16, got " + s.to_string());
  }

  slots_.assign(layers_.size() + 1, Tensor4<T>());
  pool_indices_.assign(layers_.size(), PoolIndices{});
  slots_[0] = batch;

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    const Tensor4<T>& in = slots_[layer.input_slot];
    switch (layer.kind) {
      case LayerKind::Conv: {
        Tensor4<T> out = conv2d(in, params_[layer.param_index]);
        slots_[i + 1] = layer.relu ? relu(out) : std::move(out);
        break;
      }
      case LayerKind::Deconv:
        slots_[i + 1] = transposed_conv2d(in, params_[layer.param_index]);
        break;
      case LayerKind::MaxPool: {
        auto [out, idx] = maxpool2(in);
        slots_[i + 1] = std::move(out);
        pool_indices_[i] = std::move(idx);
        break;
      }
      case LayerKind::Concat:
        slots_[i + 1] = concat_channels(in, slots_[layer.skip_slot]);
        break;
      case LayerKind::Softmax:
        slots_[i + 1] = softmax_channels(in);
        break;
    }
  }
  has_cache_ = true;
  return slots_.back();
}

template <typename T>
Gradients<T> Graph<T>::backward(const Tensor4<T>& batch_input,
                                const Tensor4<T>& loss_grad) {
  if (!has_cache_) {
    throw StateError("backward called without a matching forward pass");
  }
  if (!(batch_input.shape() == slots_[0].shape())) {
    throw StateError("backward: cached forward pass was for shape " +
                     slots_[0].shape().to_string() + ", got " +
                     batch_input.shape().to_string());
  }
  require_same_shape(loss_grad.shape(), slots_.back().shape(),
                     "backward loss_grad");

  Gradients<T> grads;
  grads.kernel.resize(params_.size());
  grads.bias.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    grads.kernel[i] = Tensor4<T>(params_[i].kernel.shape());
    grads.bias[i].assign(params_[i].bias.size(), T{0});
  }

  std::vector<Tensor4<T>> slot_grads(slots_.size());

  for (std::size_t ri = layers_.size(); ri-- > 0;) {
    const LayerSpec& layer = layers_[ri];
    if (layer.kind == LayerKind::Softmax) {
      // The loss gradient is already w.r.t. the logits (fused head), so the
      // softmax layer itself is transparent here.
      accumulate(slot_grads[layer.input_slot], loss_grad);
      continue;
    }
    Tensor4<T>& upstream = slot_grads[ri + 1];
    if (upstream.empty()) continue;

    switch (layer.kind) {
      case LayerKind::Conv: {
        Tensor4<T> masked;
        const Tensor4<T>* up = &upstream;
        if (layer.relu) {
          masked = relu_backward(slots_[ri + 1], upstream);
          up = &masked;
        }
        ConvGrads<T> cg =
            conv2d_backward(slots_[layer.input_slot],
                            params_[layer.param_index], *up);
        accumulate(grads.kernel[layer.param_index], cg.kernel);
        for (std::size_t j = 0; j < cg.bias.size(); ++j) {
          grads.bias[layer.param_index][j] += cg.bias[j];
        }
        accumulate(slot_grads[layer.input_slot], cg.input);
        break;
      }
      case LayerKind::Deconv: {
        ConvGrads<T> cg = transposed_conv2d_backward(
            slots_[layer.input_slot], params_[layer.param_index], upstream);
        accumulate(grads.kernel[layer.param_index], cg.kernel);
        for (std::size_t j = 0; j < cg.bias.size(); ++j) {
          grads.bias[layer.param_index][j] += cg.bias[j];
        }
        accumulate(slot_grads[layer.input_slot], cg.input);
        break;
      }
      case LayerKind::MaxPool:
        accumulate(slot_grads[layer.input_slot],
                   maxpool2_backward(pool_indices_[ri], upstream));
        break;
      case LayerKind::Concat: {
        auto [ga, gb] = concat_channels_backward(
            upstream, slots_[layer.input_slot].shape().channels);
        accumulate(slot_grads[layer.input_slot], ga);
        accumulate(slot_grads[layer.skip_slot], gb);
        break;
      }
      case LayerKind::Softmax:
        break;
    }
  }
  return grads;
}

template <typename T>
LabelMap Graph<T>::predict(const Tensor4<T>& image) {
  if (image.shape().batch != 1) {
    throw ShapeError("predict expects a single-sample batch, got " +
                     image.shape().to_string());
  }
  Tensor4<T> probs = forward(image);
  const Shape4& s = probs.shape();
  LabelMap map(s.height, s.width, config_.num_classes);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const T* p = probs.pixel(0, y, x);
      int best = 0;
      for (int c = 1; c < s.channels; ++c) {
        if (p[c] > p[best]) best = c;
      }
      map.at(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return map;
}

template <typename T>
std::uint64_t Graph<T>::activation_signature() const {
  if (!has_cache_) {
    throw StateError("activation_signature requires a cached forward pass");
  }
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    if (layer.kind == LayerKind::Conv && layer.relu) {
      const Tensor4<T>& out = slots_[i + 1];
      std::uint64_t bits = 0;
      int filled = 0;
      for (std::size_t j = 0; j < out.size(); ++j) {
        bits = (bits << 1) | (out[j] > T{0} ? 1u : 0u);
        if (++filled == 64) {
          mix(bits);
          bits = 0;
          filled = 0;
        }
      }
      if (filled > 0) mix(bits);
    } else if (layer.kind == LayerKind::MaxPool) {
      for (const std::int64_t a : pool_indices_[i].argmax) {
        mix(static_cast<std::uint64_t>(a));
      }
    }
  }
  return h;
}

template <typename T>
void Graph<T>::clear_cache() {
  slots_.clear();
  pool_indices_.clear();
  has_cache_ = false;
}

template class Graph<float>;
template class Graph<double>;
template struct Gradients<float>;
template struct Gradients<double>;
template Graph<double> Graph<float>::cast<double>() const;
template Graph<float> Graph<double>::cast<float>() const;

}  // namespace segmicro
