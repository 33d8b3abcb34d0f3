#include "semex/nn/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace semex::nn {

std::vector<double> sample_reparam(const DiagGaussian& d, Rng& rng,
                                   std::vector<double>* noise_out) {
  std::vector<double> noise(d.dim());
  for (double& n : noise) n = rng.normal();
  if (noise_out) *noise_out = noise;
  return reparam_from_noise(d, noise);
}

std::vector<double> reparam_from_noise(const DiagGaussian& d, std::span<const double> noise) {
  if (noise.size() != d.dim()) throw std::invalid_argument("noise size mismatch");
  std::vector<double> out(d.dim());
  for (std::size_t i = 0; i < d.dim(); ++i)
    out[i] = d.mean[i] + std::exp(d.log_std[i]) * noise[i];
  return out;
}

double kl_divergence(const DiagGaussian& post, const DiagGaussian& prior) {
  if (post.dim() != prior.dim()) throw std::invalid_argument("KL dim mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < post.dim(); ++i) {
    const double lsp = post.log_std[i], lsq = prior.log_std[i];
    const double dm = post.mean[i] - prior.mean[i];
    const double var_ratio = std::exp(2.0 * (lsp - lsq));
    kl += lsq - lsp + 0.5 * (var_ratio + dm * dm * std::exp(-2.0 * lsq)) - 0.5;
  }
  return kl;
}

void kl_divergence_backward(const DiagGaussian& post, const DiagGaussian& prior,
                            double dkl, std::span<double> dpost_mean,
                            std::span<double> dpost_log_std,
                            std::span<double> dprior_mean,
                            std::span<double> dprior_log_std) {
  const std::size_t n = post.dim();
  if (prior.dim() != n) throw std::invalid_argument("KL dim mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const double dm = post.mean[i] - prior.mean[i];
    const double inv_var_q = std::exp(-2.0 * prior.log_std[i]);
    const double var_ratio = std::exp(2.0 * (post.log_std[i] - prior.log_std[i]));
    if (!dpost_mean.empty()) dpost_mean[i] += dkl * dm * inv_var_q;
    if (!dprior_mean.empty()) dprior_mean[i] -= dkl * dm * inv_var_q;
    if (!dpost_log_std.empty()) dpost_log_std[i] += dkl * (var_ratio - 1.0);
    if (!dprior_log_std.empty())
      dprior_log_std[i] += dkl * (1.0 - var_ratio - dm * dm * inv_var_q);
  }
}

}  // namespace semex::nn
