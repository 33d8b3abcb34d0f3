#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semex/annotate/annotate.hpp"
#include "semex/grid/grid.hpp"
#include "semex/nn/dense_net.hpp"
#include "semex/rng.hpp"

namespace semex::motif {

// Bradley-Terry cross entropy on a score difference d = r_a - r_b with soft
// target y (1 = first preferred, 0 = second, 0.5 = tie):
//   loss = y * softplus(-d) + (1 - y) * softplus(d)
// Numerically safe for large |d|.
struct PreferenceLoss {
  double loss = 0.0;
  double d_ra = 0.0;  // dloss/dr_a; dloss/dr_b is its negation
};
PreferenceLoss preference_loss(double r_a, double r_b, double target);

// Training target for a recorded choice: 1 (first), 0 (second), 0.5 (both).
// 'none' has no target and throws; the trainer drops such pairs up front.
double choice_target(annotate::Choice c);

struct RewardNetConfig {
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::tanh;
  double lr = 1e-4;
  double weight_decay = 1e-5;  // L2 penalty added to the training loss
  int batch_size = 32;
  int epochs = 50;
  double val_fraction = 0.10;
  // Sanity mode: one full-batch plain-gradient-descent update per epoch
  // instead of Adam minibatches; gives a monotone epoch-loss curve.
  bool full_batch = false;
};

struct TrainReport {
  std::vector<double> train_loss;  // mean preference loss per epoch
  std::vector<double> val_loss;    // after each epoch
  int selected_epoch = -1;         // 0-based argmin of val_loss
  double holdout_ranking_accuracy = 0.0;  // ordered validation pairs only
  std::size_t train_pairs = 0, val_pairs = 0;
};

// Scalar interest score over observations.
class RewardNet {
 public:
  RewardNet() = default;
  RewardNet(const RewardNetConfig& cfg, Rng& rng);

  double score(const grid::Observation& o) const;
  double score_encoded(std::span<const double> encoded) const;

  const RewardNetConfig& config() const { return cfg_; }
  nn::DenseNet& net() { return net_; }
  const nn::DenseNet& net() const { return net_; }

  // Checkpoint plus a JSON sidecar (<path>.meta.json) recording the config,
  // training report, generation tag and dataset hash.
  void save(const std::string& path, const TrainReport& report, int generation,
            std::uint64_t dataset_hash) const;
  static RewardNet load(const std::string& path);

  int generation() const { return generation_; }
  std::uint64_t dataset_hash() const { return dataset_hash_; }

 private:
  RewardNetConfig cfg_;
  nn::DenseNet net_;
  int generation_ = 0;
  std::uint64_t dataset_hash_ = 0;
};

// 90/10 train/validation split, stratified by choice so rare labels appear in
// both splits. Deterministic in (dataset order, seed).
struct SplitIndices {
  std::vector<std::size_t> train, val;
};
SplitIndices stratified_split(const std::vector<annotate::AnnotatedPair>& data,
                              double val_fraction, std::uint64_t seed);

// Distills pairwise choices into a scalar scorer. Keeps the parameters of the
// epoch with minimum validation loss.
std::pair<RewardNet, TrainReport> train_reward_net(
    const std::vector<annotate::AnnotatedPair>& data, const RewardNetConfig& cfg,
    std::uint64_t seed);

// Fraction of ordered (first/second) pairs whose score order matches the
// label. Ties in score count half, so a constant scorer lands on exactly 0.5.
double ranking_accuracy(const std::function<double(const grid::Observation&)>& scorer,
                        const std::vector<annotate::AnnotatedPair>& pairs);

}  // namespace semex::motif
