#pragma once

#include <string>
#include <vector>

#include "semex/nn/adam.hpp"
#include "semex/nn/checkpoint.hpp"
#include "semex/nn/dense_net.hpp"
#include "semex/wm/rssm.hpp"

namespace semex::wm {

struct EnsembleConfig {
  int members = 8;
  int hidden = 24;
  double lr = 1e-3;
};

struct EnsembleSample {
  const State* state = nullptr;
  int action = 0;
  const double* target = nullptr;  // next posterior mean, stoch_dim values
};

// One-step latent predictors g_n(h, z, a) -> next posterior mean. All members
// see the same data; diversity comes from independent initialization.
// Disagreement is the mean over latent dimensions of the population variance
// across members, an epistemic novelty signal that decays as members agree.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(const RssmConfig& model_cfg, const EnsembleConfig& cfg, Rng& rng);

  int members() const { return static_cast<int>(nets_.size()); }
  const EnsembleConfig& config() const { return cfg_; }

  // Member predictions for (state, action); row n is member n's output.
  std::vector<std::vector<double>> predict(const State& s, int action) const;

  double disagreement(const State& s, int action) const;

  // One squared-error step per member over the same batch. Returns the mean
  // loss across members.
  double train_step(const std::vector<EnsembleSample>& batch);

  // Batch-mean loss of a single member; if grad is non-null the parameter
  // gradient is written there (sized and zeroed here).
  double member_loss(int n, const std::vector<EnsembleSample>& batch,
                     std::vector<double>* grad = nullptr) const;

  void add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const;
  static Ensemble from_checkpoint(const nn::CheckpointReader& r, const std::string& prefix);

  nn::DenseNet& member(int n) { return nets_.at(static_cast<std::size_t>(n)); }

 private:
  std::vector<double> input_vector(const State& s, int action) const;

  EnsembleConfig cfg_;
  int num_actions_ = 0, stoch_dim_ = 0;
  std::vector<nn::DenseNet> nets_;
  std::vector<nn::Adam> opts_;
};

}  // namespace semex::wm
