#pragma once

#include <span>
#include <vector>

#include "semex/rng.hpp"

namespace semex::nn {

// Single GRU cell with exact backward-through-time support. Gate order in the
// flat parameter vector: reset, update, candidate; each gate is a dense map
// over [x, h] (candidate over [x, r*h]) stored row-major, then its bias.
//
//   r = sigmoid(Wr [x, h] + br)
//   u = sigmoid(Wu [x, h] + bu)
//   c = tanh(Wc [x, r*h] + bc)
//   h' = u*h + (1 - u)*c
class GruCell {
 public:
  struct Cache {
    std::vector<double> x, h_in, r, u, c;
  };

  GruCell() = default;
  GruCell(int input_dim, int hidden_dim);

  void init_uniform(Rng& rng);

  int input_dim() const { return x_; }
  int hidden_dim() const { return h_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::vector<double> forward(std::span<const double> x, std::span<const double> h,
                              Cache* cache = nullptr) const;

  // Accumulates parameter gradients into grad and, if provided, input/state
  // gradients into dx / dh_in.
  void backward(const Cache& cache, std::span<const double> dh_out,
                std::span<double> grad, std::span<double> dx = {},
                std::span<double> dh_in = {}) const;

  bool params_finite() const;

 private:
  std::size_t gate_offset(int gate) const;  // 0=r, 1=u, 2=c

  int x_ = 0, h_ = 0;
  std::vector<double> params_;
};

}  // namespace semex::nn
