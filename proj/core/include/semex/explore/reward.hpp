#pragma once

#include <span>
#include <string>
#include <vector>

namespace semex::explore {

// Weights of the composed exploration reward
//   r = chi * r_task + alpha * r_sem + beta * r_dis
// where (alpha, beta) switch between the go branch (below the semantic
// quantile gate: head for interesting regions) and the explore branch (at or
// above the gate: probe the unknown from there).
struct RewardWeights {
  double chi = 0.0;
  double alpha_go = 1.0, beta_go = 0.1;
  double alpha_explore = 0.3, beta_explore = 1.0;
  double quantile_k = 0.90;

  // Non-negative weights, k in (0, 1), beta_explore >= beta_go. Presets with
  // a real go/explore split keep the inequality strict.
  void validate() const;

  static RewardWeights semantic_key_room();   // alpha 0.3/1, beta 1/0.1
  static RewardWeights semantic_key_chest();  // alpha 0.25/1, beta 1/0.05
  static RewardWeights disagreement_only();   // alphas 0, betas 1
  static RewardWeights without_disagreement(RewardWeights base);  // betas 0
  static RewardWeights task_only();           // chi 1, everything else 0
  static RewardWeights fixed(double alpha, double beta);  // no branch split
};

struct ComposedReward {
  double value = 0.0;
  bool explore_branch = false;
  double alpha = 0.0, beta = 0.0;
};

// quantile is the current gate value; callers pass the tracked estimate, and
// r_sem is compared against it unnormalized (both live in head-output space).
ComposedReward compose_reward(double r_task, double r_sem, double r_dis,
                              const RewardWeights& w, double quantile);

// Exponential moving estimate of the k-th batch quantile:
//   q <- smoothing * q + (1 - smoothing) * quantile_k(batch)
// initialized to the first batch's quantile. The estimate is a convex
// combination of per-batch quantiles, so it can never leave the range of
// observed values.
class QuantileEma {
 public:
  explicit QuantileEma(double k = 0.90, double smoothing = 0.99);

  // Empirical quantile with linear interpolation at rank k*(n-1).
  static double batch_quantile(std::vector<double> values, double k);

  void update(std::span<const double> values);
  bool initialized() const { return initialized_; }
  double value() const { return q_; }
  double k() const { return k_; }

  std::string serialize() const;
  static QuantileEma deserialize(const std::string& line);

 private:
  double k_, smoothing_, q_ = 0.0;
  bool initialized_ = false;
};

// Per-source return scale: EMA of the 5th-95th percentile range of the
// returns seen each update. Values are divided by max(range, 1), so large
// returns shrink while small ones pass through unchanged.
class RangeNormalizer {
 public:
  explicit RangeNormalizer(double smoothing = 0.99, double lo = 0.05, double hi = 0.95);

  void update(std::span<const double> returns);
  double scale() const;
  double normalize(double v) const { return v / scale(); }
  bool initialized() const { return initialized_; }

 private:
  double smoothing_, lo_, hi_;
  double range_ = 0.0;
  bool initialized_ = false;
};

}  // namespace semex::explore
