#pragma once

#include <vector>

#include "semex/explore/reward.hpp"
#include "semex/nn/adam.hpp"
#include "semex/nn/checkpoint.hpp"
#include "semex/nn/dense_net.hpp"
#include "semex/wm/ensemble.hpp"
#include "semex/wm/rssm.hpp"

namespace semex::explore {

struct ActorCriticConfig {
  int hidden = 32;
  int horizon = 15;
  double discount = 0.99;
  double lambda = 0.95;
  double entropy_coef = 3e-3;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
};

struct ImaginationStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double mean_return = 0.0;
  double explore_frac = 0.0;  // fraction of imagined steps on the explore branch
  double mean_beta = 0.0;
  double mean_rsem = 0.0, mean_rdis = 0.0, mean_rtask = 0.0;
  bool applied = true;
};

// Discrete-action policy and value function over latent states, trained on
// imagined rollouts with lambda returns. Gradients stop at the latent states:
// the world model is a fixed simulator during a policy update.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(const wm::RssmConfig& model_cfg, const ActorCriticConfig& cfg, Rng& rng);

  const ActorCriticConfig& config() const { return cfg_; }

  std::vector<double> policy_probs(const wm::State& s) const;
  int sample_action(const wm::State& s, Rng& rng) const;
  double value(const wm::State& s) const;

  // REINFORCE with entropy bonus; mean over samples of
  //   -advantage * log pi(a|s) - entropy_coef * H(pi(.|s)).
  // Accumulates dLoss/dActorParams into *grad when non-null.
  double actor_loss_and_grad(const std::vector<const wm::State*>& states,
                             const std::vector<int>& actions,
                             const std::vector<double>& advantages,
                             std::vector<double>* grad) const;

  // Mean over samples of 0.5 * (v(s) - target)^2.
  double critic_loss_and_grad(const std::vector<const wm::State*>& states,
                              const std::vector<double>& targets,
                              std::vector<double>* grad) const;

  // Imagines cfg.horizon steps from each start, composes rewards with the
  // given weights and quantile gate, normalizes per source, and applies one
  // Adam step to actor and critic. `ens` may be null (disagreement = 0).
  ImaginationStats update(const wm::WorldModel& model, const wm::Ensemble* ens,
                          const std::vector<const wm::State*>& starts,
                          const RewardWeights& weights, double quantile,
                          RangeNormalizer& norm_task, RangeNormalizer& norm_sem,
                          RangeNormalizer& norm_dis, Rng& rng);

  void add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const;
  static ActorCritic from_checkpoint(const nn::CheckpointReader& r,
                                     const std::string& prefix);

  nn::DenseNet& actor() { return actor_; }
  nn::DenseNet& critic() { return critic_; }

 private:
  ActorCriticConfig cfg_;
  int num_actions_ = 0;
  nn::DenseNet actor_, critic_;
  nn::Adam opt_actor_, opt_critic_;
};

// Lambda returns over one imagined rollout. rewards[i] is granted on the
// transition into states[i+1], values[i] and cont[i] belong to states[i];
// sizes: rewards H, values H+1, cont H+1. Returns H entries.
std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<double>& cont, double discount,
                                   double lambda);

}  // namespace semex::explore
