#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace semex::nn {

enum class Activation { identity, tanh, elu, sigmoid };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::elu: return x >= 0.0 ? x : std::expm1(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  throw std::logic_error("unknown activation");
}

// Derivative expressed through the activated value y = activate(a, x); every
// supported activation admits this form, which spares the caller from caching
// pre-activations.
inline double activate_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::elu: return y >= 0.0 ? 1.0 : y + 1.0;
    case Activation::sigmoid: return y * (1.0 - y);
  }
  throw std::logic_error("unknown activation");
}

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
  }
  throw std::logic_error("unknown activation");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "elu") return Activation::elu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation name: " + s);
}

}  // namespace semex::nn
