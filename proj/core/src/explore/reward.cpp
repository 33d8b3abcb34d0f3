#include "semex/explore/reward.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace semex::explore {

void RewardWeights::validate() const {
  if (chi < 0.0 || alpha_go < 0.0 || alpha_explore < 0.0 || beta_go < 0.0 ||
      beta_explore < 0.0)
    throw std::invalid_argument("reward weights must be non-negative");
  if (!(quantile_k > 0.0 && quantile_k < 1.0))
    throw std::invalid_argument("quantile_k must lie in (0, 1)");
  // Above the gate the model has reached interesting territory, so the
  // disagreement weight may only grow there.
  if (beta_explore < beta_go)
    throw std::invalid_argument("beta_explore must be >= beta_go");
}

RewardWeights RewardWeights::semantic_key_room() {
  RewardWeights w;
  w.chi = 0.0;
  w.alpha_explore = 0.3;
  w.beta_explore = 1.0;
  w.alpha_go = 1.0;
  w.beta_go = 0.1;
  w.quantile_k = 0.90;
  return w;
}

RewardWeights RewardWeights::semantic_key_chest() {
  RewardWeights w = semantic_key_room();
  w.alpha_explore = 0.25;
  w.beta_go = 0.05;
  return w;
}

RewardWeights RewardWeights::disagreement_only() {
  RewardWeights w;
  w.chi = 0.0;
  w.alpha_explore = w.alpha_go = 0.0;
  w.beta_explore = w.beta_go = 1.0;
  return w;
}

RewardWeights RewardWeights::without_disagreement(RewardWeights base) {
  base.beta_explore = base.beta_go = 0.0;
  return base;
}

RewardWeights RewardWeights::task_only() {
  RewardWeights w;
  w.chi = 1.0;
  w.alpha_explore = w.alpha_go = 0.0;
  w.beta_explore = w.beta_go = 0.0;
  return w;
}

RewardWeights RewardWeights::fixed(double alpha, double beta) {
  RewardWeights w;
  w.chi = 0.0;
  w.alpha_explore = w.alpha_go = alpha;
  w.beta_explore = w.beta_go = beta;
  return w;
}

ComposedReward compose_reward(double r_task, double r_sem, double r_dis,
                              const RewardWeights& w, double quantile) {
  ComposedReward out;
  out.explore_branch = r_sem >= quantile;
  out.alpha = out.explore_branch ? w.alpha_explore : w.alpha_go;
  out.beta = out.explore_branch ? w.beta_explore : w.beta_go;
  out.value = w.chi * r_task + out.alpha * r_sem + out.beta * r_dis;
  return out;
}

QuantileEma::QuantileEma(double k, double smoothing) : k_(k), smoothing_(smoothing) {
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("quantile k must lie in (0, 1)");
  if (!(smoothing >= 0.0 && smoothing < 1.0))
    throw std::invalid_argument("smoothing must lie in [0, 1)");
}

double QuantileEma::batch_quantile(std::vector<double> values, double k) {
  if (values.empty()) throw std::invalid_argument("quantile of empty batch");
  std::sort(values.begin(), values.end());
  const double pos = k * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void QuantileEma::update(std::span<const double> values) {
  const double bq = batch_quantile(std::vector<double>(values.begin(), values.end()), k_);
  if (!initialized_) {
    q_ = bq;
    initialized_ = true;
  } else {
    q_ = smoothing_ * q_ + (1.0 - smoothing_) * bq;
  }
}

std::string QuantileEma::serialize() const {
  std::ostringstream os;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%a", q_);
  os << "quantile_ema k=" << k_ << " smoothing=" << smoothing_
     << " init=" << (initialized_ ? 1 : 0) << " q=" << buf;
  return os.str();
}

QuantileEma QuantileEma::deserialize(const std::string& line) {
  std::istringstream is(line);
  std::string tag, kv;
  is >> tag;
  if (tag != "quantile_ema") throw std::invalid_argument("not a quantile_ema line");
  double k = 0.9, smoothing = 0.99, q = 0.0;
  int init = 0;
  while (is >> kv) {
    const std::size_t eq = kv.find('=');
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "k") k = std::stod(val);
    else if (key == "smoothing") smoothing = std::stod(val);
    else if (key == "init") init = std::stoi(val);
    else if (key == "q") q = std::strtod(val.c_str(), nullptr);
  }
  QuantileEma e(k, smoothing);
  e.q_ = q;
  e.initialized_ = init != 0;
  return e;
}

RangeNormalizer::RangeNormalizer(double smoothing, double lo, double hi)
    : smoothing_(smoothing), lo_(lo), hi_(hi) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw std::invalid_argument("bad percentile bounds");
}

void RangeNormalizer::update(std::span<const double> returns) {
  if (returns.empty()) return;
  std::vector<double> v(returns.begin(), returns.end());
  const double lo = QuantileEma::batch_quantile(v, lo_);
  const double hi = QuantileEma::batch_quantile(std::move(v), hi_);
  const double range = hi - lo;
  if (!initialized_) {
    range_ = range;
    initialized_ = true;
  } else {
    range_ = smoothing_ * range_ + (1.0 - smoothing_) * range;
  }
}

double RangeNormalizer::scale() const {
  // Floor of 1: large return ranges are scaled down, but a weak or dying
  // source is never amplified back up to unit size.
  return std::max(range_, 1.0);
}

}  // namespace semex::explore
