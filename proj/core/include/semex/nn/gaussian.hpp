#pragma once

#include <span>
#include <vector>

#include "semex/rng.hpp"

namespace semex::nn {

// Diagonal Gaussian over R^n parameterized by mean and log standard
// deviation. Log-stds are expected to be pre-clamped by the producer.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;

  std::size_t dim() const { return mean.size(); }
};

// Draws noise ~ N(0, I) and returns mean + exp(log_std) * noise. The noise
// used is written to *noise_out when non-null so pathwise gradients can be
// replayed.
std::vector<double> sample_reparam(const DiagGaussian& d, Rng& rng,
                                   std::vector<double>* noise_out = nullptr);

// Deterministic reparameterized sample from given noise.
std::vector<double> reparam_from_noise(const DiagGaussian& d, std::span<const double> noise);

// KL(post || prior) for diagonal Gaussians, in nats.
double kl_divergence(const DiagGaussian& post, const DiagGaussian& prior);

// Analytic gradients of kl_divergence with respect to all four parameter
// blocks, accumulated into the given spans (each of size dim, may be empty).
void kl_divergence_backward(const DiagGaussian& post, const DiagGaussian& prior,
                            double dkl, std::span<double> dpost_mean,
                            std::span<double> dpost_log_std,
                            std::span<double> dprior_mean,
                            std::span<double> dprior_log_std);

}  // namespace semex::nn
