#include "semex/nn/gru.hpp"

#include <cmath>
#include <stdexcept>

namespace semex::nn {

namespace {
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

GruCell::GruCell(int input_dim, int hidden_dim) : x_(input_dim), h_(hidden_dim) {
  if (input_dim <= 0 || hidden_dim <= 0)
    throw std::invalid_argument("GruCell dims must be positive");
  const std::size_t per_gate =
      static_cast<std::size_t>(h_) * static_cast<std::size_t>(x_ + h_) + static_cast<std::size_t>(h_);
  params_.assign(3 * per_gate, 0.0);
}

std::size_t GruCell::gate_offset(int gate) const {
  const std::size_t per_gate =
      static_cast<std::size_t>(h_) * static_cast<std::size_t>(x_ + h_) + static_cast<std::size_t>(h_);
  return static_cast<std::size_t>(gate) * per_gate;
}

void GruCell::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(x_ + h_));
  const std::size_t nw = static_cast<std::size_t>(h_) * static_cast<std::size_t>(x_ + h_);
  for (int g = 0; g < 3; ++g) {
    const std::size_t o = gate_offset(g);
    for (std::size_t i = 0; i < nw; ++i) params_[o + i] = rng.uniform(-bound, bound);
    for (int i = 0; i < h_; ++i) params_[o + nw + static_cast<std::size_t>(i)] = 0.0;
  }
}

std::vector<double> GruCell::forward(std::span<const double> x, std::span<const double> h,
                                     Cache* cache) const {
  if (x.size() != static_cast<std::size_t>(x_) || h.size() != static_cast<std::size_t>(h_))
    throw std::invalid_argument("GruCell forward size mismatch");
  const std::size_t nw = static_cast<std::size_t>(h_) * static_cast<std::size_t>(x_ + h_);

  auto gate_pre = [&](int gate, std::span<const double> hin, int row) {
    const double* w = params_.data() + gate_offset(gate) +
                      static_cast<std::size_t>(row) * static_cast<std::size_t>(x_ + h_);
    const double* b = params_.data() + gate_offset(gate) + nw;
    double s = b[row];
    for (int c = 0; c < x_; ++c) s += w[c] * x[static_cast<std::size_t>(c)];
    for (int c = 0; c < h_; ++c) s += w[x_ + c] * hin[static_cast<std::size_t>(c)];
    return s;
  };

  std::vector<double> r(static_cast<std::size_t>(h_)), u(static_cast<std::size_t>(h_));
  for (int i = 0; i < h_; ++i) {
    r[static_cast<std::size_t>(i)] = sigmoid(gate_pre(0, h, i));
    u[static_cast<std::size_t>(i)] = sigmoid(gate_pre(1, h, i));
  }
  std::vector<double> rh(static_cast<std::size_t>(h_));
  for (int i = 0; i < h_; ++i)
    rh[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
  std::vector<double> c(static_cast<std::size_t>(h_));
  for (int i = 0; i < h_; ++i) c[static_cast<std::size_t>(i)] = std::tanh(gate_pre(2, rh, i));

  std::vector<double> out(static_cast<std::size_t>(h_));
  for (int i = 0; i < h_; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out[k] = u[k] * h[k] + (1.0 - u[k]) * c[k];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_in.assign(h.begin(), h.end());
    cache->r = r;
    cache->u = u;
    cache->c = c;
  }
  return out;
}

void GruCell::backward(const Cache& cache, std::span<const double> dh_out,
                       std::span<double> grad, std::span<double> dx,
                       std::span<double> dh_in) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("grad size mismatch");
  if (dh_out.size() != static_cast<std::size_t>(h_))
    throw std::invalid_argument("dh_out size mismatch");
  const std::size_t nw = static_cast<std::size_t>(h_) * static_cast<std::size_t>(x_ + h_);

  std::vector<double> dxl(static_cast<std::size_t>(x_), 0.0);
  std::vector<double> dhl(static_cast<std::size_t>(h_), 0.0);

  std::vector<double> dpre_c(static_cast<std::size_t>(h_)), dpre_u(static_cast<std::size_t>(h_)),
      dpre_r(static_cast<std::size_t>(h_), 0.0);
  for (int i = 0; i < h_; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double g = dh_out[k];
    const double du = g * (cache.h_in[k] - cache.c[k]);
    const double dc = g * (1.0 - cache.u[k]);
    dhl[k] += g * cache.u[k];
    dpre_u[k] = du * cache.u[k] * (1.0 - cache.u[k]);
    dpre_c[k] = dc * (1.0 - cache.c[k] * cache.c[k]);
  }

  // Candidate gate: input is [x, r*h].
  {
    const std::size_t o = gate_offset(2);
    std::vector<double> drh(static_cast<std::size_t>(h_), 0.0);
    for (int i = 0; i < h_; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double d = dpre_c[k];
      double* gw = grad.data() + o + k * static_cast<std::size_t>(x_ + h_);
      const double* w = params_.data() + o + k * static_cast<std::size_t>(x_ + h_);
      for (int c = 0; c < x_; ++c) {
        gw[c] += d * cache.x[static_cast<std::size_t>(c)];
        dxl[static_cast<std::size_t>(c)] += d * w[c];
      }
      for (int c = 0; c < h_; ++c) {
        const std::size_t ck = static_cast<std::size_t>(c);
        gw[x_ + c] += d * cache.r[ck] * cache.h_in[ck];
        drh[ck] += d * w[x_ + c];
      }
      grad[o + nw + k] += d;
    }
    for (int i = 0; i < h_; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double dr = drh[k] * cache.h_in[k];
      dhl[k] += drh[k] * cache.r[k];
      dpre_r[k] = dr * cache.r[k] * (1.0 - cache.r[k]);
    }
  }

  // Reset and update gates: input is [x, h].
  for (int g = 0; g < 2; ++g) {
    const std::size_t o = gate_offset(g);
    const std::vector<double>& dpre = g == 0 ? dpre_r : dpre_u;
    for (int i = 0; i < h_; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double d = dpre[k];
      double* gw = grad.data() + o + k * static_cast<std::size_t>(x_ + h_);
      const double* w = params_.data() + o + k * static_cast<std::size_t>(x_ + h_);
      for (int c = 0; c < x_; ++c) {
        gw[c] += d * cache.x[static_cast<std::size_t>(c)];
        dxl[static_cast<std::size_t>(c)] += d * w[c];
      }
      for (int c = 0; c < h_; ++c) {
        gw[x_ + c] += d * cache.h_in[static_cast<std::size_t>(c)];
        dhl[static_cast<std::size_t>(c)] += d * w[x_ + c];
      }
      grad[o + nw + k] += d;
    }
  }

  if (!dx.empty()) {
    if (dx.size() != dxl.size()) throw std::invalid_argument("dx size mismatch");
    for (std::size_t i = 0; i < dxl.size(); ++i) dx[i] += dxl[i];
  }
  if (!dh_in.empty()) {
    if (dh_in.size() != dhl.size()) throw std::invalid_argument("dh_in size mismatch");
    for (std::size_t i = 0; i < dhl.size(); ++i) dh_in[i] += dhl[i];
  }
}

bool GruCell::params_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

}  // namespace semex::nn
