#include "semex/wm/rssm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semex::wm {

namespace {

using nlohmann::json;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stable categorical cross entropy over one cell; grad_out receives
// softmax - target.
double cell_cross_entropy(std::span<const double> logits, std::span<const double> target,
                          std::span<double> grad_out) {
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  double ce = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    ce += target[k] * (lse - logits[k]);
    grad_out[k] = std::exp(logits[k] - lse) - target[k];
  }
  return ce;
}

}  // namespace

std::vector<double> State::feature() const {
  std::vector<double> f;
  f.reserve(h.size() + z.size());
  f.insert(f.end(), h.begin(), h.end());
  f.insert(f.end(), z.begin(), z.end());
  return f;
}

void SequenceBatch::validate() const {
  if (batch <= 0 || len <= 0) throw std::invalid_argument("empty sequence batch");
  const std::size_t n = steps();
  if (actions.size() != n || reward.size() != n || cont.size() != n || sem.size() != n)
    throw std::invalid_argument("sequence batch field size mismatch");
  if (obs.size() != n * static_cast<std::size_t>(obs_dim))
    throw std::invalid_argument("sequence batch obs size mismatch");
}

WorldModel::WorldModel(const RssmConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int obs_dim = cfg.obs.encoded_dim();
  const int feat = cfg.feature_dim();
  using nn::Activation;
  enc_ = nn::DenseNet({obs_dim, cfg.hidden, cfg.hidden}, Activation::elu, Activation::identity);
  post_ = nn::DenseNet({cfg.det_dim + cfg.hidden, cfg.hidden, 2 * cfg.stoch_dim},
                       Activation::elu, Activation::identity);
  prior_ = nn::DenseNet({cfg.det_dim, cfg.hidden, 2 * cfg.stoch_dim}, Activation::elu,
                        Activation::identity);
  dec_ = nn::DenseNet({feat, cfg.hidden, obs_dim}, Activation::elu, Activation::identity);
  rew_ = nn::DenseNet({feat, cfg.hidden, 1}, Activation::elu, Activation::identity);
  cont_ = nn::DenseNet({feat, cfg.hidden, 1}, Activation::elu, Activation::identity);
  sem_ = nn::DenseNet({feat, cfg.hidden, 1}, Activation::elu, Activation::identity);
  gru_ = nn::GruCell(cfg.num_actions + cfg.stoch_dim, cfg.det_dim);

  enc_.init_uniform(rng);
  post_.init_uniform(rng);
  prior_.init_uniform(rng);
  dec_.init_uniform(rng);
  rew_.init_uniform(rng);
  cont_.init_uniform(rng);
  sem_.init_uniform(rng);
  gru_.init_uniform(rng);

  opt_enc_ = nn::Adam(enc_.param_count(), cfg.lr);
  opt_post_ = nn::Adam(post_.param_count(), cfg.lr);
  opt_prior_ = nn::Adam(prior_.param_count(), cfg.lr);
  opt_dec_ = nn::Adam(dec_.param_count(), cfg.lr);
  opt_rew_ = nn::Adam(rew_.param_count(), cfg.lr);
  opt_cont_ = nn::Adam(cont_.param_count(), cfg.lr);
  opt_sem_ = nn::Adam(sem_.param_count(), cfg.lr);
  opt_gru_ = nn::Adam(gru_.param_count(), cfg.lr);
}

State WorldModel::initial_state() const {
  return State{std::vector<double>(static_cast<std::size_t>(cfg_.det_dim), 0.0),
               std::vector<double>(static_cast<std::size_t>(cfg_.stoch_dim), 0.0)};
}

nn::DiagGaussian WorldModel::split_gaussian(std::span<const double> raw) const {
  const std::size_t j = static_cast<std::size_t>(cfg_.stoch_dim);
  nn::DiagGaussian g;
  g.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(j));
  g.log_std.resize(j);
  for (std::size_t i = 0; i < j; ++i)
    g.log_std[i] = std::clamp(raw[j + i], cfg_.logstd_min, cfg_.logstd_max);
  return g;
}

std::vector<double> WorldModel::gru_input(int action, std::span<const double> z) const {
  std::vector<double> x(static_cast<std::size_t>(cfg_.num_actions) + z.size(), 0.0);
  if (action >= cfg_.num_actions)
    throw std::invalid_argument("action out of range for world model");
  if (action >= 0) x[static_cast<std::size_t>(action)] = 1.0;
  std::copy(z.begin(), z.end(), x.begin() + cfg_.num_actions);
  return x;
}

State WorldModel::observe(const State& prev, int action,
                          std::span<const double> obs_encoded, Rng& rng) const {
  State s;
  s.h = gru_.forward(gru_input(action, prev.z), prev.h);
  const std::vector<double> embed = enc_.forward(obs_encoded);
  std::vector<double> post_in(s.h);
  post_in.insert(post_in.end(), embed.begin(), embed.end());
  const nn::DiagGaussian g = split_gaussian(post_.forward(post_in));
  s.z = nn::sample_reparam(g, rng);
  return s;
}

State WorldModel::observe_mean(const State& prev, int action,
                               std::span<const double> obs_encoded) const {
  State s;
  s.h = gru_.forward(gru_input(action, prev.z), prev.h);
  const std::vector<double> embed = enc_.forward(obs_encoded);
  std::vector<double> post_in(s.h);
  post_in.insert(post_in.end(), embed.begin(), embed.end());
  s.z = split_gaussian(post_.forward(post_in)).mean;
  return s;
}

State WorldModel::imagine_step(const State& prev, int action, Rng& rng) const {
  State s;
  s.h = gru_.forward(gru_input(action, prev.z), prev.h);
  const nn::DiagGaussian g = split_gaussian(prior_.forward(s.h));
  s.z = nn::sample_reparam(g, rng);
  return s;
}

double WorldModel::predict_reward(const State& s) const {
  return rew_.forward(s.feature())[0];
}

double WorldModel::predict_sem(const State& s) const {
  return sem_.forward(s.feature())[0];
}

double WorldModel::predict_continue(const State& s) const {
  return sigmoid(cont_.forward(s.feature())[0]);
}

std::vector<double> WorldModel::decode_logits(const State& s) const {
  return dec_.forward(s.feature());
}

// Everything the backward pass needs about one (b, t) step.
struct WorldModel::StepForward {
  nn::GruCell::Cache gru;
  nn::DenseNet::Cache enc, post, prior, dec, rew, cont, sem;
  nn::DiagGaussian qg, pg;           // clamped gaussians
  std::vector<double> q_mask, p_mask;  // 1 where the log-std clamp passes gradient
  std::vector<double> noise;
  std::vector<double> h, z;
  std::vector<double> dec_logits;
  double rew_out = 0.0, cont_logit = 0.0, sem_out = 0.0;
  double kl_raw = 0.0;
};

double WorldModel::sequence_loss(const SequenceBatch& batch, Rng& rng) const {
  batch.validate();
  if (batch.obs_dim != cfg_.obs.encoded_dim())
    throw std::invalid_argument("batch obs_dim does not match model config");
  const std::size_t n = batch.steps();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t od = static_cast<std::size_t>(batch.obs_dim);

  double total = 0.0;
  std::vector<double> cell_grad(static_cast<std::size_t>(cfg_.obs.types));
  for (int b = 0; b < batch.batch; ++b) {
    State s = initial_state();
    for (int t = 0; t < batch.len; ++t) {
      const std::size_t k = static_cast<std::size_t>(b * batch.len + t);
      const std::span<const double> obs(batch.obs.data() + k * od, od);

      s.h = gru_.forward(gru_input(batch.actions[k], s.z), s.h);
      const std::vector<double> embed = enc_.forward(obs);
      std::vector<double> post_in(s.h);
      post_in.insert(post_in.end(), embed.begin(), embed.end());
      const nn::DiagGaussian qg = split_gaussian(post_.forward(post_in));
      const nn::DiagGaussian pg = split_gaussian(prior_.forward(s.h));
      std::vector<double> noise(static_cast<std::size_t>(cfg_.stoch_dim));
      for (double& v : noise) v = rng.normal();
      s.z = nn::reparam_from_noise(qg, noise);

      const std::vector<double> feat = s.feature();
      const std::vector<double> logits = dec_.forward(feat);
      double recon = 0.0;
      for (int c = 0; c < cfg_.obs.cells; ++c) {
        const std::size_t o = static_cast<std::size_t>(c * cfg_.obs.types);
        recon += cell_cross_entropy(
            std::span<const double>(logits.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
            std::span<const double>(obs.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
            cell_grad);
      }
      const double key_logit = logits.back();
      const double key_target = obs[od - 1];
      recon += softplus(key_logit) - key_target * key_logit;

      const double kl_raw = nn::kl_divergence(qg, pg);
      const double rew_out = rew_.forward(feat)[0];
      const double cont_logit = cont_.forward(feat)[0];
      const double sem_out = sem_.forward(feat)[0];

      total += cfg_.recon_scale * recon + cfg_.kl_scale * std::max(kl_raw, cfg_.free_bits) +
               cfg_.reward_scale * 0.5 * (rew_out - batch.reward[k]) * (rew_out - batch.reward[k]) +
               cfg_.cont_scale * (softplus(cont_logit) - batch.cont[k] * cont_logit) +
               cfg_.sem_scale * 0.5 * (sem_out - batch.sem[k]) * (sem_out - batch.sem[k]);
    }
  }
  return total * inv_n;
}

struct WorldModel::Gradients {
  std::vector<double> enc, post, prior, dec, rew, cont, sem, gru;
};

TrainOutput WorldModel::forward_backward(const SequenceBatch& batch, Rng& rng,
                                         Gradients& g) const {
  batch.validate();
  if (batch.obs_dim != cfg_.obs.encoded_dim())
    throw std::invalid_argument("batch obs_dim does not match model config");
  const std::size_t n = batch.steps();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t od = static_cast<std::size_t>(batch.obs_dim);
  const std::size_t jd = static_cast<std::size_t>(cfg_.stoch_dim);

  TrainOutput out;
  out.states.resize(n);
  out.post_mean.resize(n * jd);
  out.sem_pred.resize(n);

  std::vector<StepForward> fw(n);
  LossBreakdown& bd = out.losses;

  // Forward.
  std::vector<double> cell_grad(static_cast<std::size_t>(cfg_.obs.types));
  for (int b = 0; b < batch.batch; ++b) {
    State s = initial_state();
    for (int t = 0; t < batch.len; ++t) {
      const std::size_t k = static_cast<std::size_t>(b * batch.len + t);
      StepForward& f = fw[k];
      const std::span<const double> obs(batch.obs.data() + k * od, od);

      f.h = gru_.forward(gru_input(batch.actions[k], s.z), s.h, &f.gru);
      const std::vector<double> embed = enc_.forward(obs, &f.enc);
      std::vector<double> post_in(f.h);
      post_in.insert(post_in.end(), embed.begin(), embed.end());
      const std::vector<double> q_raw = post_.forward(post_in, &f.post);
      const std::vector<double> p_raw = prior_.forward(f.h, &f.prior);
      f.qg = split_gaussian(q_raw);
      f.pg = split_gaussian(p_raw);
      f.q_mask.resize(jd);
      f.p_mask.resize(jd);
      for (std::size_t j = 0; j < jd; ++j) {
        f.q_mask[j] = (q_raw[jd + j] > cfg_.logstd_min && q_raw[jd + j] < cfg_.logstd_max) ? 1.0 : 0.0;
        f.p_mask[j] = (p_raw[jd + j] > cfg_.logstd_min && p_raw[jd + j] < cfg_.logstd_max) ? 1.0 : 0.0;
      }
      f.noise.resize(jd);
      for (double& v : f.noise) v = rng.normal();
      f.z = nn::reparam_from_noise(f.qg, f.noise);

      out.states[k] = State{f.h, f.z};
      const std::vector<double> feat = out.states[k].feature();
      f.dec_logits = dec_.forward(feat, &f.dec);
      double recon = 0.0;
      for (int c = 0; c < cfg_.obs.cells; ++c) {
        const std::size_t o = static_cast<std::size_t>(c * cfg_.obs.types);
        recon += cell_cross_entropy(
            std::span<const double>(f.dec_logits.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
            std::span<const double>(obs.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
            cell_grad);
      }
      recon += softplus(f.dec_logits.back()) - obs[od - 1] * f.dec_logits.back();

      f.kl_raw = nn::kl_divergence(f.qg, f.pg);
      f.rew_out = rew_.forward(feat, &f.rew)[0];
      f.cont_logit = cont_.forward(feat, &f.cont)[0];
      f.sem_out = sem_.forward(feat, &f.sem)[0];

      bd.recon += recon * inv_n;
      bd.kl_raw += f.kl_raw * inv_n;
      bd.kl += std::max(f.kl_raw, cfg_.free_bits) * inv_n;
      bd.reward += 0.5 * (f.rew_out - batch.reward[k]) * (f.rew_out - batch.reward[k]) * inv_n;
      bd.cont += (softplus(f.cont_logit) - batch.cont[k] * f.cont_logit) * inv_n;
      bd.sem += 0.5 * (f.sem_out - batch.sem[k]) * (f.sem_out - batch.sem[k]) * inv_n;

      std::copy(f.qg.mean.begin(), f.qg.mean.end(),
                out.post_mean.begin() + static_cast<std::ptrdiff_t>(k * jd));
      out.sem_pred[k] = f.sem_out;

      s = out.states[k];
    }
  }
  bd.total = cfg_.recon_scale * bd.recon + cfg_.kl_scale * bd.kl +
             cfg_.reward_scale * bd.reward + cfg_.cont_scale * bd.cont +
             cfg_.sem_scale * bd.sem;

  // Backward.
  g.enc.assign(enc_.param_count(), 0.0);
  g.post.assign(post_.param_count(), 0.0);
  g.prior.assign(prior_.param_count(), 0.0);
  g.dec.assign(dec_.param_count(), 0.0);
  g.rew.assign(rew_.param_count(), 0.0);
  g.cont.assign(cont_.param_count(), 0.0);
  g.sem.assign(sem_.param_count(), 0.0);
  g.gru.assign(gru_.param_count(), 0.0);
  std::vector<double>&g_enc = g.enc, &g_post = g.post, &g_prior = g.prior, &g_dec = g.dec,
      &g_rew = g.rew, &g_cont = g.cont, &g_sem = g.sem, &g_gru = g.gru;

  const std::size_t hd = static_cast<std::size_t>(cfg_.det_dim);
  const std::size_t feat_dim = hd + jd;
  std::vector<double> dfeat(feat_dim), dlogits(od), dhead(1);
  std::vector<double> dmu_q(jd), dls_q(jd), dmu_p(jd), dls_p(jd), dpost_out(2 * jd),
      dprior_out(2 * jd), dpost_in(hd + static_cast<std::size_t>(cfg_.hidden)),
      dembed(static_cast<std::size_t>(cfg_.hidden)), dgru_x(static_cast<std::size_t>(cfg_.num_actions) + jd);

  for (int b = 0; b < batch.batch; ++b) {
    std::vector<double> dh_next(hd, 0.0), dz_next(jd, 0.0);
    for (int t = batch.len - 1; t >= 0; --t) {
      const std::size_t k = static_cast<std::size_t>(b * batch.len + t);
      StepForward& f = fw[k];
      const std::span<const double> obs(batch.obs.data() + k * od, od);

      std::fill(dfeat.begin(), dfeat.end(), 0.0);

      // Decoder.
      if (cfg_.recon_scale != 0.0) {
        for (int c = 0; c < cfg_.obs.cells; ++c) {
          const std::size_t o = static_cast<std::size_t>(c * cfg_.obs.types);
          cell_cross_entropy(
              std::span<const double>(f.dec_logits.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
              std::span<const double>(obs.data() + o, static_cast<std::size_t>(cfg_.obs.types)),
              std::span<double>(dlogits.data() + o, static_cast<std::size_t>(cfg_.obs.types)));
        }
        dlogits[od - 1] = sigmoid(f.dec_logits.back()) - obs[od - 1];
        const double w = cfg_.recon_scale * inv_n;
        for (double& v : dlogits) v *= w;
        dec_.backward(f.dec, dlogits, g_dec, dfeat);
      }
      // Continue head (trains the trunk).
      if (cfg_.cont_scale != 0.0) {
        dhead[0] = cfg_.cont_scale * inv_n * (sigmoid(f.cont_logit) - batch.cont[k]);
        cont_.backward(f.cont, dhead, g_cont, dfeat);
      }
      // Reward and semantic heads: parameters only, no trunk gradient.
      if (cfg_.reward_scale != 0.0) {
        dhead[0] = cfg_.reward_scale * inv_n * (f.rew_out - batch.reward[k]);
        rew_.backward(f.rew, dhead, g_rew);
      }
      if (cfg_.sem_scale != 0.0) {
        dhead[0] = cfg_.sem_scale * inv_n * (f.sem_out - batch.sem[k]);
        sem_.backward(f.sem, dhead, g_sem);
      }

      // Split feature gradient into dh, dz.
      for (std::size_t i = 0; i < hd; ++i) dh_next[i] += dfeat[i];
      for (std::size_t j = 0; j < jd; ++j) dz_next[j] += dfeat[hd + j];

      // Reparameterized sample: z = mu_q + exp(ls_q) * noise.
      std::fill(dmu_q.begin(), dmu_q.end(), 0.0);
      std::fill(dls_q.begin(), dls_q.end(), 0.0);
      std::fill(dmu_p.begin(), dmu_p.end(), 0.0);
      std::fill(dls_p.begin(), dls_p.end(), 0.0);
      for (std::size_t j = 0; j < jd; ++j) {
        dmu_q[j] += dz_next[j];
        dls_q[j] += dz_next[j] * std::exp(f.qg.log_std[j]) * f.noise[j];
      }
      // KL with the free-bits gate.
      if (cfg_.kl_scale != 0.0 && f.kl_raw > cfg_.free_bits)
        nn::kl_divergence_backward(f.qg, f.pg, cfg_.kl_scale * inv_n, dmu_q, dls_q,
                                   dmu_p, dls_p);

      // Through the log-std clamps into the raw net outputs.
      for (std::size_t j = 0; j < jd; ++j) {
        dpost_out[j] = dmu_q[j];
        dpost_out[jd + j] = dls_q[j] * f.q_mask[j];
        dprior_out[j] = dmu_p[j];
        dprior_out[jd + j] = dls_p[j] * f.p_mask[j];
      }

      std::fill(dpost_in.begin(), dpost_in.end(), 0.0);
      post_.backward(f.post, dpost_out, g_post, dpost_in);
      std::fill(dembed.begin(), dembed.end(), 0.0);
      for (std::size_t i = 0; i < dembed.size(); ++i) dembed[i] = dpost_in[hd + i];
      enc_.backward(f.enc, dembed, g_enc);
      for (std::size_t i = 0; i < hd; ++i) dh_next[i] += dpost_in[i];

      prior_.backward(f.prior, dprior_out, g_prior, std::span<double>(dh_next));

      // GRU step; dgru_x splits into action part (discarded) and dz_prev.
      std::fill(dgru_x.begin(), dgru_x.end(), 0.0);
      std::vector<double> dh_prev(hd, 0.0);
      gru_.backward(f.gru, dh_next, g_gru, dgru_x, dh_prev);

      dh_next = std::move(dh_prev);
      for (std::size_t j = 0; j < jd; ++j)
        dz_next[j] = dgru_x[static_cast<std::size_t>(cfg_.num_actions) + j];
    }
  }

  return out;
}

TrainOutput WorldModel::train_step(const SequenceBatch& batch, Rng& rng) {
  Gradients g;
  TrainOutput out = forward_backward(batch, rng, g);

  // All-or-nothing update.
  auto finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (finite(g.enc) && finite(g.post) && finite(g.prior) && finite(g.dec) &&
      finite(g.rew) && finite(g.cont) && finite(g.sem) && finite(g.gru)) {
    opt_enc_.step(enc_.params(), g.enc);
    opt_post_.step(post_.params(), g.post);
    opt_prior_.step(prior_.params(), g.prior);
    opt_dec_.step(dec_.params(), g.dec);
    opt_rew_.step(rew_.params(), g.rew);
    opt_cont_.step(cont_.params(), g.cont);
    opt_sem_.step(sem_.params(), g.sem);
    opt_gru_.step(gru_.params(), g.gru);
    out.losses.applied = true;
  } else {
    out.losses.applied = false;
  }
  return out;
}

double WorldModel::loss_and_gradient(const SequenceBatch& batch, Rng& rng,
                                     std::vector<double>& grad) const {
  Gradients g;
  const TrainOutput out = forward_backward(batch, rng, g);
  grad.clear();
  for (const std::vector<double>* blk :
       {&g.enc, &g.gru, &g.post, &g.prior, &g.dec, &g.rew, &g.cont, &g.sem})
    grad.insert(grad.end(), blk->begin(), blk->end());
  return out.losses.total;
}

std::vector<double> WorldModel::all_params() const {
  std::vector<double> out;
  out.insert(out.end(), enc_.params().begin(), enc_.params().end());
  out.insert(out.end(), gru_.params().begin(), gru_.params().end());
  for (const nn::DenseNet* n : {&post_, &prior_, &dec_, &rew_, &cont_, &sem_})
    out.insert(out.end(), n->params().begin(), n->params().end());
  return out;
}

void WorldModel::set_all_params(std::span<const double> p) {
  std::size_t off = 0;
  auto take = [&](std::span<double> dst) {
    if (off + dst.size() > p.size()) throw std::invalid_argument("parameter vector too short");
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(off),
              p.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  };
  take(enc_.params());
  take(gru_.params());
  for (nn::DenseNet* n : {&post_, &prior_, &dec_, &rew_, &cont_, &sem_}) take(n->params());
  if (off != p.size()) throw std::invalid_argument("parameter vector size mismatch");
}

void WorldModel::add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const {
  json meta{{"kind", "world_model"},
            {"obs_cells", cfg_.obs.cells},
            {"obs_types", cfg_.obs.types},
            {"num_actions", cfg_.num_actions},
            {"det_dim", cfg_.det_dim},
            {"stoch_dim", cfg_.stoch_dim},
            {"hidden", cfg_.hidden},
            {"free_bits", cfg_.free_bits},
            {"kl_scale", cfg_.kl_scale},
            {"recon_scale", cfg_.recon_scale},
            {"reward_scale", cfg_.reward_scale},
            {"cont_scale", cfg_.cont_scale},
            {"sem_scale", cfg_.sem_scale},
            {"logstd_min", cfg_.logstd_min},
            {"logstd_max", cfg_.logstd_max},
            {"lr", cfg_.lr}};
  w.add_text(prefix + "meta", meta.dump());
  w.add_dense(prefix + "enc", enc_);
  w.add_gru(prefix + "gru", gru_);
  w.add_dense(prefix + "post", post_);
  w.add_dense(prefix + "prior", prior_);
  w.add_dense(prefix + "dec", dec_);
  w.add_dense(prefix + "rew", rew_);
  w.add_dense(prefix + "cont", cont_);
  w.add_dense(prefix + "sem", sem_);
}

WorldModel WorldModel::from_checkpoint(const nn::CheckpointReader& r,
                                       const std::string& prefix) {
  const json meta = json::parse(r.text(prefix + "meta"));
  if (meta.value("kind", "") != "world_model")
    throw std::runtime_error("checkpoint section is not a world model");
  RssmConfig cfg;
  cfg.obs.cells = meta.at("obs_cells").get<int>();
  cfg.obs.types = meta.at("obs_types").get<int>();
  cfg.num_actions = meta.at("num_actions").get<int>();
  cfg.det_dim = meta.at("det_dim").get<int>();
  cfg.stoch_dim = meta.at("stoch_dim").get<int>();
  cfg.hidden = meta.at("hidden").get<int>();
  cfg.free_bits = meta.at("free_bits").get<double>();
  cfg.kl_scale = meta.at("kl_scale").get<double>();
  cfg.recon_scale = meta.at("recon_scale").get<double>();
  cfg.reward_scale = meta.at("reward_scale").get<double>();
  cfg.cont_scale = meta.at("cont_scale").get<double>();
  cfg.sem_scale = meta.at("sem_scale").get<double>();
  cfg.logstd_min = meta.at("logstd_min").get<double>();
  cfg.logstd_max = meta.at("logstd_max").get<double>();
  cfg.lr = meta.at("lr").get<double>();

  Rng rng(0);
  WorldModel m(cfg, rng);
  m.enc_ = r.dense(prefix + "enc");
  m.gru_ = r.gru(prefix + "gru");
  m.post_ = r.dense(prefix + "post");
  m.prior_ = r.dense(prefix + "prior");
  m.dec_ = r.dense(prefix + "dec");
  m.rew_ = r.dense(prefix + "rew");
  m.cont_ = r.dense(prefix + "cont");
  m.sem_ = r.dense(prefix + "sem");
  return m;
}

std::vector<double> WorldModel::trunk_params() const {
  std::vector<double> out;
  for (const nn::DenseNet* n : {&enc_, &post_, &prior_, &dec_, &cont_})
    out.insert(out.end(), n->params().begin(), n->params().end());
  out.insert(out.end(), gru_.params().begin(), gru_.params().end());
  return out;
}

bool WorldModel::params_finite() const {
  return enc_.params_finite() && post_.params_finite() && prior_.params_finite() &&
         dec_.params_finite() && rew_.params_finite() && cont_.params_finite() &&
         sem_.params_finite() && gru_.params_finite();
}

}  // namespace semex::wm
