#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace semex::nn {

// Dense row-major matrix of doubles. Deliberately minimal: the training code
// works on flat parameter vectors, this type exists for weight inspection and
// explicit construction in tests.
class Tensor2 {
 public:
  Tensor2() : rows_(0), cols_(0) {}
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor2 identity(std::size_t n) {
    Tensor2 t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    check(r, c);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    check(r, c);
    return data_[r * cols_ + c];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  void check(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("Tensor2 index");
  }

  std::size_t rows_, cols_;
  std::vector<double> data_;
};

}  // namespace semex::nn
