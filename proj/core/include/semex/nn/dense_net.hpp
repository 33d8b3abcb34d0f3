#pragma once

#include <span>
#include <vector>

#include "semex/nn/activation.hpp"
#include "semex/nn/tensor.hpp"
#include "semex/rng.hpp"

namespace semex::nn {

// Fully connected network with a shared hidden activation and a separate
// output activation. Parameters live in one contiguous vector laid out layer
// by layer (row-major weights, then biases), so optimizers and checkpoint
// code can treat the whole network as a flat array.
class DenseNet {
 public:
  struct Cache {
    std::vector<double> input;
    // outputs_[l] holds the activated output of layer l.
    std::vector<std::vector<double>> outputs;
  };

  DenseNet() = default;
  // sizes = {in, h1, ..., out}, at least {in, out}.
  DenseNet(std::vector<int> sizes, Activation hidden, Activation output);

  void init_uniform(Rng& rng);  // U(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases
  void init_zero();

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Weight/bias views for a single layer.
  Tensor2 weights(int layer) const;
  std::vector<double> biases(int layer) const;
  void set_weights(int layer, const Tensor2& w);
  void set_biases(int layer, const std::vector<double>& b);

  // Forward pass. If cache is non-null it is filled for a later backward().
  std::vector<double> forward(std::span<const double> in, Cache* cache = nullptr) const;

  // Accumulates dLoss/dParams into grad (length param_count()) given
  // dLoss/dOutput. If dinput is non-null, accumulates dLoss/dInput into it.
  void backward(const Cache& cache, std::span<const double> dout,
                std::span<double> grad, std::span<double> dinput = {}) const;

  // All entries finite?
  bool params_finite() const;

 private:
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;

  std::vector<int> sizes_;
  Activation hidden_ = Activation::tanh;
  Activation output_ = Activation::identity;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // per layer: weight block start
};

}  // namespace semex::nn
