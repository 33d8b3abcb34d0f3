#include "semex/explore/actor_critic.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semex::explore {

namespace {

using nlohmann::json;

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<double>& cont, double discount,
                                   double lambda) {
  const std::size_t h = rewards.size();
  if (values.size() != h + 1 || cont.size() != h + 1)
    throw std::invalid_argument("lambda_returns size mismatch");
  std::vector<double> out(h);
  double next = values[h];  // R_H bootstraps from the final value
  for (std::size_t i = h; i-- > 0;) {
    const double blended = (1.0 - lambda) * values[i + 1] + lambda * next;
    out[i] = rewards[i] + discount * cont[i + 1] * blended;
    next = out[i];
  }
  return out;
}

ActorCritic::ActorCritic(const wm::RssmConfig& model_cfg, const ActorCriticConfig& cfg,
                         Rng& rng)
    : cfg_(cfg), num_actions_(model_cfg.num_actions) {
  const int feat = model_cfg.feature_dim();
  actor_ = nn::DenseNet({feat, cfg.hidden, model_cfg.num_actions}, nn::Activation::elu,
                        nn::Activation::identity);
  critic_ = nn::DenseNet({feat, cfg.hidden, 1}, nn::Activation::elu,
                         nn::Activation::identity);
  actor_.init_uniform(rng);
  critic_.init_uniform(rng);
  opt_actor_ = nn::Adam(actor_.param_count(), cfg.actor_lr);
  opt_critic_ = nn::Adam(critic_.param_count(), cfg.critic_lr);
}

std::vector<double> ActorCritic::policy_probs(const wm::State& s) const {
  return softmax(actor_.forward(s.feature()));
}

int ActorCritic::sample_action(const wm::State& s, Rng& rng) const {
  const std::vector<double> p = policy_probs(s);
  double u = rng.uniform();
  for (std::size_t a = 0; a < p.size(); ++a) {
    u -= p[a];
    if (u < 0.0) return static_cast<int>(a);
  }
  return static_cast<int>(p.size()) - 1;
}

double ActorCritic::value(const wm::State& s) const {
  return critic_.forward(s.feature())[0];
}

double ActorCritic::actor_loss_and_grad(const std::vector<const wm::State*>& states,
                                        const std::vector<int>& actions,
                                        const std::vector<double>& advantages,
                                        std::vector<double>* grad) const {
  if (states.size() != actions.size() || states.size() != advantages.size())
    throw std::invalid_argument("actor batch size mismatch");
  if (states.empty()) throw std::invalid_argument("empty actor batch");
  const double inv_n = 1.0 / static_cast<double>(states.size());
  double loss = 0.0;
  nn::DenseNet::Cache cache;
  std::vector<double> dlogits(static_cast<std::size_t>(num_actions_));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::vector<double> logits = actor_.forward(states[i]->feature(), &cache);
    const std::vector<double> p = softmax(logits);
    const int a = actions[i];
    if (a < 0 || a >= num_actions_) throw std::invalid_argument("action out of range");
    double entropy = 0.0;
    for (double q : p) entropy -= q > 0.0 ? q * std::log(q) : 0.0;
    const double logp = std::log(std::max(p[static_cast<std::size_t>(a)], 1e-300));
    loss += (-advantages[i] * logp - cfg_.entropy_coef * entropy) * inv_n;
    if (grad) {
      for (int k = 0; k < num_actions_; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double indicator = k == a ? 1.0 : 0.0;
        const double pg = advantages[i] * (p[ks] - indicator);
        const double logp_k = std::log(std::max(p[ks], 1e-300));
        const double ent_g = cfg_.entropy_coef * p[ks] * (logp_k + entropy);
        dlogits[ks] = (pg + ent_g) * inv_n;
      }
      actor_.backward(cache, dlogits, *grad);
    }
  }
  return loss;
}

double ActorCritic::critic_loss_and_grad(const std::vector<const wm::State*>& states,
                                         const std::vector<double>& targets,
                                         std::vector<double>* grad) const {
  if (states.size() != targets.size())
    throw std::invalid_argument("critic batch size mismatch");
  if (states.empty()) throw std::invalid_argument("empty critic batch");
  const double inv_n = 1.0 / static_cast<double>(states.size());
  double loss = 0.0;
  nn::DenseNet::Cache cache;
  double dout[1];
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double v = critic_.forward(states[i]->feature(), &cache)[0];
    const double d = v - targets[i];
    loss += 0.5 * d * d * inv_n;
    if (grad) {
      dout[0] = d * inv_n;
      critic_.backward(cache, dout, *grad);
    }
  }
  return loss;
}

ImaginationStats ActorCritic::update(const wm::WorldModel& model, const wm::Ensemble* ens,
                                     const std::vector<const wm::State*>& starts,
                                     const RewardWeights& weights, double quantile,
                                     RangeNormalizer& norm_task, RangeNormalizer& norm_sem,
                                     RangeNormalizer& norm_dis, Rng& rng) {
  if (starts.empty()) throw std::invalid_argument("no imagination start states");
  const int h = cfg_.horizon;
  const std::size_t n_roll = starts.size();

  struct Rollout {
    std::vector<wm::State> states;            // H+1
    std::vector<int> actions;                 // H
    std::vector<double> rtask, rsem, rdis;    // H (rtask/rsem at arrival state)
    std::vector<double> values, cont;         // H+1
  };
  std::vector<Rollout> rollouts(n_roll);

  ImaginationStats stats;
  for (std::size_t r = 0; r < n_roll; ++r) {
    Rollout& ro = rollouts[r];
    ro.states.reserve(static_cast<std::size_t>(h) + 1);
    ro.states.push_back(*starts[r]);
    ro.values.push_back(value(ro.states[0]));
    ro.cont.push_back(1.0);  // starts come from real steps; treat as alive
    for (int i = 0; i < h; ++i) {
      const wm::State& s = ro.states.back();
      const int a = sample_action(s, rng);
      ro.actions.push_back(a);
      ro.rdis.push_back(ens ? ens->disagreement(s, a) : 0.0);
      wm::State next = model.imagine_step(s, a, rng);
      ro.rtask.push_back(model.predict_reward(next));
      ro.rsem.push_back(model.predict_sem(next));
      ro.cont.push_back(model.predict_continue(next));
      ro.values.push_back(value(next));
      ro.states.push_back(std::move(next));
    }
  }

  // Per-source returns feed the scale trackers before composition.
  std::vector<double> all_task, all_sem, all_dis;
  all_task.reserve(n_roll * static_cast<std::size_t>(h));
  all_sem.reserve(n_roll * static_cast<std::size_t>(h));
  all_dis.reserve(n_roll * static_cast<std::size_t>(h));
  for (const Rollout& ro : rollouts) {
    for (double v : lambda_returns(ro.rtask, ro.values, ro.cont, cfg_.discount, cfg_.lambda))
      all_task.push_back(v);
    for (double v : lambda_returns(ro.rsem, ro.values, ro.cont, cfg_.discount, cfg_.lambda))
      all_sem.push_back(v);
    for (double v : lambda_returns(ro.rdis, ro.values, ro.cont, cfg_.discount, cfg_.lambda))
      all_dis.push_back(v);
  }
  norm_task.update(all_task);
  norm_sem.update(all_sem);
  norm_dis.update(all_dis);

  std::vector<const wm::State*> flat_states;
  std::vector<int> flat_actions;
  std::vector<double> flat_adv, flat_targets;
  flat_states.reserve(n_roll * static_cast<std::size_t>(h));

  double sum_beta = 0.0, sum_expl = 0.0, sum_ret = 0.0;
  double sum_rsem = 0.0, sum_rdis = 0.0, sum_rtask = 0.0;
  for (Rollout& ro : rollouts) {
    std::vector<double> rewards(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i) {
      const std::size_t is = static_cast<std::size_t>(i);
      // Branch selection sees the raw semantic score; the composed value is
      // rebuilt from scale-normalized sources.
      const ComposedReward c =
          compose_reward(norm_task.normalize(ro.rtask[is]), ro.rsem[is],
                         norm_dis.normalize(ro.rdis[is]), weights, quantile);
      rewards[is] = weights.chi * norm_task.normalize(ro.rtask[is]) +
                    c.alpha * norm_sem.normalize(ro.rsem[is]) +
                    c.beta * norm_dis.normalize(ro.rdis[is]);
      sum_beta += c.beta;
      sum_expl += c.explore_branch ? 1.0 : 0.0;
      sum_rsem += ro.rsem[is];
      sum_rdis += ro.rdis[is];
      sum_rtask += ro.rtask[is];
    }
    const std::vector<double> returns =
        lambda_returns(rewards, ro.values, ro.cont, cfg_.discount, cfg_.lambda);
    for (int i = 0; i < h; ++i) {
      const std::size_t is = static_cast<std::size_t>(i);
      flat_states.push_back(&ro.states[is]);
      flat_actions.push_back(ro.actions[is]);
      flat_adv.push_back(returns[is] - ro.values[is]);
      flat_targets.push_back(returns[is]);
      sum_ret += returns[is];
    }
  }

  std::vector<double> g_actor(actor_.param_count(), 0.0);
  std::vector<double> g_critic(critic_.param_count(), 0.0);
  stats.actor_loss = actor_loss_and_grad(flat_states, flat_actions, flat_adv, &g_actor);
  stats.critic_loss = critic_loss_and_grad(flat_states, flat_targets, &g_critic);

  const bool a_ok = opt_actor_.step(actor_.params(), g_actor) == nn::Adam::Step::applied;
  const bool c_ok = opt_critic_.step(critic_.params(), g_critic) == nn::Adam::Step::applied;
  stats.applied = a_ok && c_ok;

  const double inv = 1.0 / static_cast<double>(n_roll * static_cast<std::size_t>(h));
  stats.mean_beta = sum_beta * inv;
  stats.explore_frac = sum_expl * inv;
  stats.mean_return = sum_ret * inv;
  stats.mean_rsem = sum_rsem * inv;
  stats.mean_rdis = sum_rdis * inv;
  stats.mean_rtask = sum_rtask * inv;

  // Entropy reported separately for monitoring.
  double ent = 0.0;
  for (const wm::State* s : flat_states) {
    for (double p : policy_probs(*s)) ent -= p > 0.0 ? p * std::log(p) : 0.0;
  }
  stats.entropy = ent * inv;
  return stats;
}

void ActorCritic::add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const {
  json meta{{"kind", "actor_critic"},
            {"num_actions", num_actions_},
            {"hidden", cfg_.hidden},
            {"horizon", cfg_.horizon},
            {"discount", cfg_.discount},
            {"lambda", cfg_.lambda},
            {"entropy_coef", cfg_.entropy_coef},
            {"actor_lr", cfg_.actor_lr},
            {"critic_lr", cfg_.critic_lr}};
  w.add_text(prefix + "meta", meta.dump());
  w.add_dense(prefix + "actor", actor_);
  w.add_dense(prefix + "critic", critic_);
}

ActorCritic ActorCritic::from_checkpoint(const nn::CheckpointReader& r,
                                         const std::string& prefix) {
  const json meta = json::parse(r.text(prefix + "meta"));
  if (meta.value("kind", "") != "actor_critic")
    throw std::runtime_error("checkpoint section is not an actor-critic");
  ActorCritic ac;
  ac.num_actions_ = meta.at("num_actions").get<int>();
  ac.cfg_.hidden = meta.at("hidden").get<int>();
  ac.cfg_.horizon = meta.at("horizon").get<int>();
  ac.cfg_.discount = meta.at("discount").get<double>();
  ac.cfg_.lambda = meta.at("lambda").get<double>();
  ac.cfg_.entropy_coef = meta.at("entropy_coef").get<double>();
  ac.cfg_.actor_lr = meta.at("actor_lr").get<double>();
  ac.cfg_.critic_lr = meta.at("critic_lr").get<double>();
  ac.actor_ = r.dense(prefix + "actor");
  ac.critic_ = r.dense(prefix + "critic");
  ac.opt_actor_ = nn::Adam(ac.actor_.param_count(), ac.cfg_.actor_lr);
  ac.opt_critic_ = nn::Adam(ac.critic_.param_count(), ac.cfg_.critic_lr);
  return ac;
}

}  // namespace semex::explore
