#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segmicro/labelmap.hpp"
#include "segmicro/ops.hpp"
#include "segmicro/tensor.hpp"

namespace segmicro {

enum class Arch { Fcn, UNet };

std::string arch_name(Arch arch);
Arch arch_from_name(const std::string& name);

// Declarative description of one network. `filters` lists the per-layer
// filter counts for the FCN (three or more entries) or the five per-level
// encoder filter counts for the U-Net.
struct ModelConfig {
  Arch arch = Arch::Fcn;
  int num_channels = 1;
  int num_classes = 3;
  std::vector<int> filters;
  int conv_kernel = 3;
  int deconv_kernel = 2;  // U-Net only
  int out_kernel = 1;
  int pool_size = 2;              // fixed
  int deconv_stride = 2;          // fixed

  // Throws ConfigError naming the violated field.
  void validate() const;
};

enum class LayerKind { Conv, Deconv, MaxPool, Concat, Softmax };

// One step of the (fixed) execution tape. Slot 0 is the network input; layer
// i writes slot i+1.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int input_slot = 0;
  int skip_slot = -1;   // Concat: slot of the skip tensor (appended second)
  int param_index = -1; // Conv/Deconv: index into the parameter list
  bool relu = false;    // Conv only
  std::string name;
};

// Gradients for every learnable parameter, in parameter-list order.
template <typename T>
struct Gradients {
  std::vector<Tensor4<T>> kernel;
  std::vector<std::vector<T>> bias;

  std::vector<std::span<const T>> spans() const;
};

// An instantiated FCN or U-Net: parameter storage plus the activation cache
// that the backward pass consumes. Instances are single-threaded during
// forward/backward; distinct instances may run in parallel.
template <typename T>
class Graph {
 public:
  static Graph build_fcn(const ModelConfig& config, std::uint64_t seed);
  static Graph build_unet(const ModelConfig& config, std::uint64_t seed);
  static Graph build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  std::size_t num_params() const { return params_.size(); }
  ConvParams<T>& param(std::size_t i) { return params_[i]; }
  const ConvParams<T>& param(std::size_t i) const { return params_[i]; }
  const std::string& param_name(std::size_t i) const { return param_names_[i]; }

  // Total learnable scalar count (kernel volumes plus bias lengths).
  std::int64_t param_count() const;

  // Mutable views over every parameter array (kernel then bias, per layer),
  // in a fixed order shared with Gradients::spans() and the checkpoint file.
  std::vector<std::span<T>> param_spans();

  // Runs the network; caches activations for backward. Output channel vectors
  // are softmax probabilities.
  Tensor4<T> forward(const Tensor4<T>& batch);

  // Reverse-mode pass. `loss_grad` is the gradient w.r.t. the pre-softmax
  // logits (the fused softmax + cross-entropy form). Requires a cached
  // forward pass for a batch of the same shape.
  Gradients<T> backward(const Tensor4<T>& batch_input,
                        const Tensor4<T>& loss_grad);

  // Argmax decode of the softmax head for a single-sample batch; ties break
  // toward the lowest class index.
  LabelMap predict(const Tensor4<T>& image);

  // Hash of the cached forward's ReLU sign pattern and pool argmax choices.
  // Two probe evaluations with different signatures straddle a kink, where
  // finite differences of the loss are invalid.
  std::uint64_t activation_signature() const;

  void clear_cache();

  template <typename U>
  Graph<U> cast() const {
    Graph<U> out;
    out.config_ = config_;
    out.layers_ = layers_;
    out.param_names_ = param_names_;
    out.params_.reserve(params_.size());
    for (const auto& p : params_) {
      out.params_.push_back(p.template cast<U>());
    }
    return out;
  }

 private:
  template <typename U>
  friend class Graph;

  void add_conv(int in_channels, int out_channels, int kernel, bool relu,
                const std::string& name, std::uint64_t seed);
  void add_deconv(int in_channels, int out_channels, int kernel,
                  const std::string& name, std::uint64_t seed);

  ModelConfig config_;
  std::vector<LayerSpec> layers_;
  std::vector<ConvParams<T>> params_;
  std::vector<std::string> param_names_;

  // Forward cache: one activation per slot plus pool bookkeeping.
  std::vector<Tensor4<T>> slots_;
  std::vector<PoolIndices> pool_indices_;
  bool has_cache_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;
extern template struct Gradients<float>;
extern template struct Gradients<double>;
extern template Graph<double> Graph<float>::cast<double>() const;
extern template Graph<float> Graph<double>::cast<float>() const;

}  // namespace segmicro
