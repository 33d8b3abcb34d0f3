#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace semex::nn {

// Adam with bias correction. A step with any non-finite gradient entry is
// rejected: parameters and moments stay untouched and the caller is told, so
// a diverged loss cannot poison the parameter vector.
class Adam {
 public:
  enum class Step { applied, rejected_nonfinite };

  Adam() = default;
  explicit Adam(std::size_t n, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  Step step(std::span<double> params, std::span<const double> grad);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t steps_taken() const { return t_; }
  std::int64_t steps_rejected() const { return rejected_; }

 private:
  std::size_t n_ = 0;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0, rejected_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace semex::nn
