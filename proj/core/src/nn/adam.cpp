#include "semex/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace semex::nn {

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : n_(n), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(n, 0.0), v_(n, 0.0) {}

Adam::Step Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != n_ || grad.size() != n_)
    throw std::invalid_argument("Adam size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (!std::isfinite(grad[i])) {
      ++rejected_;
      return Step::rejected_nonfinite;
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < n_; ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
  return Step::applied;
}

}  // namespace semex::nn
