#include "semex/nn/dense_net.hpp"

#include <cmath>
#include <stdexcept>

namespace semex::nn {

DenseNet::DenseNet(std::vector<int> sizes, Activation hidden, Activation output)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("DenseNet needs >= 2 sizes");
  for (int s : sizes_)
    if (s <= 0) throw std::invalid_argument("DenseNet sizes must be positive");
  std::size_t total = 0;
  offsets_.resize(sizes_.size() - 1);
  for (int l = 0; l < num_layers(); ++l) {
    offsets_[static_cast<std::size_t>(l)] = total;
    total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l]);
    total += static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_.assign(total, 0.0);
}

std::size_t DenseNet::weight_offset(int layer) const {
  return offsets_.at(static_cast<std::size_t>(layer));
}

std::size_t DenseNet::bias_offset(int layer) const {
  return weight_offset(layer) +
         static_cast<std::size_t>(sizes_[layer + 1]) * static_cast<std::size_t>(sizes_[layer]);
}

void DenseNet::init_uniform(Rng& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const std::size_t w0 = weight_offset(l);
    const std::size_t nw = static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l]);
    for (std::size_t i = 0; i < nw; ++i) params_[w0 + i] = rng.uniform(-bound, bound);
    const std::size_t b0 = bias_offset(l);
    for (int i = 0; i < sizes_[l + 1]; ++i) params_[b0 + static_cast<std::size_t>(i)] = 0.0;
  }
}

void DenseNet::init_zero() { params_.assign(params_.size(), 0.0); }

Tensor2 DenseNet::weights(int layer) const {
  Tensor2 w(static_cast<std::size_t>(sizes_[layer + 1]), static_cast<std::size_t>(sizes_[layer]));
  const std::size_t w0 = weight_offset(layer);
  for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = params_[w0 + i];
  return w;
}

std::vector<double> DenseNet::biases(int layer) const {
  const std::size_t b0 = bias_offset(layer);
  return std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(b0),
                             params_.begin() + static_cast<std::ptrdiff_t>(b0) + sizes_[layer + 1]);
}

void DenseNet::set_weights(int layer, const Tensor2& w) {
  if (w.rows() != static_cast<std::size_t>(sizes_[layer + 1]) ||
      w.cols() != static_cast<std::size_t>(sizes_[layer]))
    throw std::invalid_argument("set_weights shape mismatch");
  const std::size_t w0 = weight_offset(layer);
  for (std::size_t i = 0; i < w.size(); ++i) params_[w0 + i] = w.data()[i];
}

void DenseNet::set_biases(int layer, const std::vector<double>& b) {
  if (b.size() != static_cast<std::size_t>(sizes_[layer + 1]))
    throw std::invalid_argument("set_biases shape mismatch");
  const std::size_t b0 = bias_offset(layer);
  for (std::size_t i = 0; i < b.size(); ++i) params_[b0 + i] = b[i];
}

std::vector<double> DenseNet::forward(std::span<const double> in, Cache* cache) const {
  if (in.size() != static_cast<std::size_t>(sizes_.front()))
    throw std::invalid_argument("DenseNet forward input size mismatch");
  if (cache) {
    cache->input.assign(in.begin(), in.end());
    cache->outputs.assign(static_cast<std::size_t>(num_layers()), {});
  }
  std::vector<double> cur(in.begin(), in.end());
  for (int l = 0; l < num_layers(); ++l) {
    const int nin = sizes_[l], nout = sizes_[l + 1];
    std::vector<double> next(static_cast<std::size_t>(nout));
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const Activation act = (l + 1 == num_layers()) ? output_ : hidden_;
    for (int r = 0; r < nout; ++r) {
      const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(nin);
      double s = b[r];
      for (int c = 0; c < nin; ++c) s += wr[c] * cur[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = activate(act, s);
    }
    cur = std::move(next);
    if (cache) cache->outputs[static_cast<std::size_t>(l)] = cur;
  }
  return cur;
}

void DenseNet::backward(const Cache& cache, std::span<const double> dout,
                        std::span<double> grad, std::span<double> dinput) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("grad size mismatch");
  if (dout.size() != static_cast<std::size_t>(sizes_.back()))
    throw std::invalid_argument("dout size mismatch");
  if (cache.outputs.size() != static_cast<std::size_t>(num_layers()))
    throw std::invalid_argument("backward called with stale cache");

  std::vector<double> delta(dout.begin(), dout.end());
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int nin = sizes_[l], nout = sizes_[l + 1];
    const Activation act = (l + 1 == num_layers()) ? output_ : hidden_;
    const std::vector<double>& out = cache.outputs[static_cast<std::size_t>(l)];
    const std::vector<double>& in =
        l == 0 ? cache.input : cache.outputs[static_cast<std::size_t>(l - 1)];
    // Push dLoss/dActivated through the activation.
    for (int r = 0; r < nout; ++r)
      delta[static_cast<std::size_t>(r)] *=
          activate_grad_from_output(act, out[static_cast<std::size_t>(r)]);

    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    const double* w = params_.data() + weight_offset(l);
    std::vector<double> dprev(static_cast<std::size_t>(nin), 0.0);
    for (int r = 0; r < nout; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      double* gwr = gw + static_cast<std::size_t>(r) * static_cast<std::size_t>(nin);
      const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(nin);
      for (int c = 0; c < nin; ++c) {
        gwr[c] += d * in[static_cast<std::size_t>(c)];
        dprev[static_cast<std::size_t>(c)] += d * wr[c];
      }
      gb[r] += d;
    }
    delta = std::move(dprev);
  }
  if (!dinput.empty()) {
    if (dinput.size() != static_cast<std::size_t>(sizes_.front()))
      throw std::invalid_argument("dinput size mismatch");
    for (std::size_t i = 0; i < dinput.size(); ++i) dinput[i] += delta[i];
  }
}

bool DenseNet::params_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

}  // namespace semex::nn
