#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semex/nn/adam.hpp"
#include "semex/nn/checkpoint.hpp"
#include "semex/nn/dense_net.hpp"
#include "semex/nn/gaussian.hpp"
#include "semex/nn/gru.hpp"
#include "semex/rng.hpp"

namespace semex::wm {

// Observation layout: `cells` categorical cells of `types` classes, one-hot,
// plus one trailing binary flag. The gridworld uses 25 cells x 8 types + key
// flag; tests shrink this for cheap finite-difference checks.
struct ObsSpec {
  int cells = 25;
  int types = 8;
  int encoded_dim() const { return cells * types + 1; }
};

struct RssmConfig {
  ObsSpec obs;
  int num_actions = 5;
  int det_dim = 32;   // recurrent state h
  int stoch_dim = 8;  // stochastic latent z
  int hidden = 32;    // width of every MLP component
  double free_bits = 1.0;  // nats; KL below this yields no gradient
  double kl_scale = 1.0;
  double recon_scale = 1.0;
  double reward_scale = 1.0;
  double cont_scale = 1.0;
  double sem_scale = 1.0;
  double logstd_min = -5.0, logstd_max = 2.0;
  double lr = 1e-3;

  int feature_dim() const { return det_dim + stoch_dim; }
};

// Latent state: deterministic path h plus stochastic sample z.
struct State {
  std::vector<double> h, z;

  std::vector<double> feature() const;  // concat(h, z)
};

// Training batch of B sequences of length L, flattened b-major. For index
// k = b*L + t: actions[k] is the action taken at window position t and
// obs[k*obs_dim..] the observation that followed it; reward/cont/sem are the
// prediction targets at that observation.
struct SequenceBatch {
  int batch = 0, len = 0;
  int obs_dim = 0;
  std::vector<int> actions;
  std::vector<double> obs;
  std::vector<double> reward;
  std::vector<double> cont;  // 1 - done
  std::vector<double> sem;

  std::size_t steps() const { return static_cast<std::size_t>(batch) * static_cast<std::size_t>(len); }
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;      // after the free-bits floor
  double kl_raw = 0.0;  // before the floor
  double reward = 0.0;
  double cont = 0.0;
  double sem = 0.0;
  bool applied = true;  // false if the update was rejected (non-finite grads)
};

struct TrainOutput {
  LossBreakdown losses;
  // Posterior states after each observation, b-major; size batch*len.
  std::vector<State> states;
  // Posterior means, ensemble regression targets; size batch*len*stoch_dim.
  std::vector<double> post_mean;
  // Semantic head outputs at those states; feeds the quantile tracker.
  std::vector<double> sem_pred;
};

// Recurrent latent dynamics model. One GRU core with Gaussian prior and
// posterior over z, and four heads over (h, z): observation decoder, task
// reward, continue flag and semantic reward. The reward and semantic heads
// are trained under a stop-gradient: their losses never reach the trunk.
class WorldModel {
 public:
  WorldModel() = default;
  WorldModel(const RssmConfig& cfg, Rng& rng);

  const RssmConfig& config() const { return cfg_; }
  // Loss-scale override; a phase that has no semantic targets sets this to 0
  // so the head stays untouched.
  void set_sem_scale(double s) { cfg_.sem_scale = s; }
  State initial_state() const;

  // Posterior update from a real observation. action < 0 encodes "episode
  // start", i.e. a zero action vector.
  State observe(const State& prev, int action, std::span<const double> obs_encoded,
                Rng& rng) const;
  // Same but z = posterior mean; deterministic evaluation.
  State observe_mean(const State& prev, int action,
                     std::span<const double> obs_encoded) const;

  // Prior rollout step used by imagination.
  State imagine_step(const State& prev, int action, Rng& rng) const;

  double predict_reward(const State& s) const;
  double predict_sem(const State& s) const;
  double predict_continue(const State& s) const;  // probability in (0, 1)
  std::vector<double> decode_logits(const State& s) const;

  // One optimization step over the batch. Noise consumption: stoch_dim
  // normal draws per (b, t), b-major, matching sequence_loss.
  TrainOutput train_step(const SequenceBatch& batch, Rng& rng);

  // Loss only, no update; same rng convention as train_step so a fixed seed
  // makes this a deterministic function of the parameters.
  double sequence_loss(const SequenceBatch& batch, Rng& rng) const;

  // Total loss and its analytic gradient over all_params(), no update.
  // The stop-gradient on the reward and semantic heads is part of the loss
  // definition, so checking this against finite differences only agrees when
  // the scales that cross the trunk boundary are isolated (see tests).
  double loss_and_gradient(const SequenceBatch& batch, Rng& rng,
                           std::vector<double>& grad) const;

  // Every parameter block concatenated in a fixed order (enc, gru, post,
  // prior, dec, rew, cont, sem); loss_and_gradient uses the same layout.
  std::vector<double> all_params() const;
  void set_all_params(std::span<const double> p);

  void add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const;
  static WorldModel from_checkpoint(const nn::CheckpointReader& r,
                                    const std::string& prefix);

  // Component access for tests and the trunk-freeze contract.
  nn::DenseNet& encoder() { return enc_; }
  nn::GruCell& gru() { return gru_; }
  nn::DenseNet& posterior() { return post_; }
  nn::DenseNet& prior() { return prior_; }
  nn::DenseNet& decoder() { return dec_; }
  nn::DenseNet& reward_head() { return rew_; }
  nn::DenseNet& continue_head() { return cont_; }
  nn::DenseNet& semantic_head() { return sem_; }

  // Concatenated view of all trunk parameter blocks (everything except the
  // reward and semantic heads).
  std::vector<double> trunk_params() const;

  bool params_finite() const;

 private:
  struct StepForward;  // internal per-step cache
  struct Gradients;    // per-component gradient blocks

  TrainOutput forward_backward(const SequenceBatch& batch, Rng& rng, Gradients& g) const;
  nn::DiagGaussian split_gaussian(std::span<const double> raw) const;
  std::vector<double> gru_input(int action, std::span<const double> z) const;

  RssmConfig cfg_;
  nn::DenseNet enc_, post_, prior_, dec_, rew_, cont_, sem_;
  nn::GruCell gru_;
  nn::Adam opt_enc_, opt_post_, opt_prior_, opt_dec_, opt_rew_, opt_cont_, opt_sem_, opt_gru_;
};

}  // namespace semex::wm
