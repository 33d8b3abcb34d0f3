#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "semex/annotate/annotate.hpp"
#include "semex/wm/ensemble.hpp"
#include "semex/wm/rssm.hpp"

using namespace semex;
using namespace semex::wm;

namespace {

RssmConfig tiny_config() {
  RssmConfig cfg;
  cfg.obs = ObsSpec{3, 3};
  cfg.num_actions = 3;
  cfg.det_dim = 6;
  cfg.stoch_dim = 3;
  cfg.hidden = 8;
  cfg.free_bits = 0.0;  // keep the loss smooth for finite differences
  return cfg;
}

std::vector<double> random_obs_vec(const ObsSpec& spec, Rng& rng) {
  std::vector<double> o(static_cast<std::size_t>(spec.encoded_dim()), 0.0);
  for (int c = 0; c < spec.cells; ++c)
    o[static_cast<std::size_t>(c * spec.types) + rng.uniform_index(static_cast<std::size_t>(spec.types))] = 1.0;
  o.back() = rng.uniform() < 0.5 ? 1.0 : 0.0;
  return o;
}

SequenceBatch make_batch(const RssmConfig& cfg, int B, int L, Rng& rng) {
  SequenceBatch b;
  b.batch = B;
  b.len = L;
  b.obs_dim = cfg.obs.encoded_dim();
  for (int i = 0; i < B; ++i) {
    for (int t = 0; t < L; ++t) {
      b.actions.push_back(t == 0 ? -1 : static_cast<int>(rng.uniform_index(
                                            static_cast<std::size_t>(cfg.num_actions))));
      const std::vector<double> o = random_obs_vec(cfg.obs, rng);
      b.obs.insert(b.obs.end(), o.begin(), o.end());
      b.reward.push_back(0.1 * rng.normal());
      b.cont.push_back(rng.uniform() < 0.9 ? 1.0 : 0.0);
      b.sem.push_back(rng.normal());
    }
  }
  return b;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average tied ranks
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("filtering and imagination are deterministic") {
  Rng init(1);
  const RssmConfig cfg = tiny_config();
  const WorldModel m(cfg, init);
  Rng data(2);
  const std::vector<double> obs = random_obs_vec(cfg.obs, data);

  const State s0 = m.initial_state();
  CHECK(std::all_of(s0.h.begin(), s0.h.end(), [](double v) { return v == 0.0; }));
  CHECK(std::all_of(s0.z.begin(), s0.z.end(), [](double v) { return v == 0.0; }));

  Rng r1(3), r2(3);
  const State a = m.observe(s0, -1, obs, r1);
  const State b = m.observe(s0, -1, obs, r2);
  CHECK(a.h == b.h);
  CHECK(a.z == b.z);
  CHECK(m.observe_mean(s0, -1, obs).z == m.observe_mean(s0, -1, obs).z);

  Rng i1(4), i2(4);
  const State ia = m.imagine_step(a, 1, i1);
  const State ib = m.imagine_step(a, 1, i2);
  CHECK(ia.h == ib.h);
  CHECK(ia.z == ib.z);
  CHECK(std::all_of(ia.z.begin(), ia.z.end(), [](double v) { return std::isfinite(v); }));

  // features concatenate h then z
  const std::vector<double> f = ia.feature();
  REQUIRE(f.size() == ia.h.size() + ia.z.size());
  CHECK(std::equal(ia.h.begin(), ia.h.end(), f.begin()));
  CHECK(std::equal(ia.z.begin(), ia.z.end(), f.begin() + static_cast<std::ptrdiff_t>(ia.h.size())));

  CHECK(m.predict_continue(ia) > 0.0);
  CHECK(m.predict_continue(ia) < 1.0);
  CHECK(std::isfinite(m.predict_reward(ia)));
  CHECK(std::isfinite(m.predict_sem(ia)));
  CHECK(m.decode_logits(ia).size() == static_cast<std::size_t>(cfg.obs.encoded_dim()));
}

TEST_CASE("posterior equals the prior once the observation path is silenced") {
  Rng init(5);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);

  // copy the prior weights into the posterior's h columns, zero the embedding
  // columns: the observation can no longer move the posterior
  const nn::Tensor2 wp0 = m.prior().weights(0);
  nn::Tensor2 wq0(static_cast<std::size_t>(cfg.hidden),
                  static_cast<std::size_t>(cfg.det_dim + cfg.hidden), 0.0);
  for (std::size_t r = 0; r < wp0.rows(); ++r)
    for (std::size_t c = 0; c < wp0.cols(); ++c) wq0(r, c) = wp0(r, c);
  m.posterior().set_weights(0, wq0);
  m.posterior().set_biases(0, m.prior().biases(0));
  m.posterior().set_weights(1, m.prior().weights(1));
  m.posterior().set_biases(1, m.prior().biases(1));

  Rng data(6);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> h(static_cast<std::size_t>(cfg.det_dim));
    for (double& v : h) v = data.normal();
    const std::vector<double> embed = m.encoder().forward(random_obs_vec(cfg.obs, data));
    std::vector<double> post_in(h);
    post_in.insert(post_in.end(), embed.begin(), embed.end());
    const std::vector<double> q = m.posterior().forward(post_in);
    const std::vector<double> p = m.prior().forward(h);
    REQUIRE(q.size() == p.size());
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(q[i] == p[i]);
  }
}

TEST_CASE("kl stays non negative and respects the free bits floor") {
  Rng init(7);
  RssmConfig cfg = tiny_config();
  cfg.free_bits = 1.0;
  WorldModel m(cfg, init);
  Rng data(8), noise(9);
  for (int t = 0; t < 30; ++t) {
    const SequenceBatch batch = make_batch(cfg, 2, 3, data);
    const TrainOutput out = m.train_step(batch, noise);
    CHECK(out.losses.kl_raw >= 0.0);
    CHECK(out.losses.kl >= out.losses.kl_raw);
    CHECK(out.losses.kl >= cfg.free_bits);
  }
}

TEST_CASE("log std clamping keeps sampled latents bounded") {
  Rng init(10);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);

  // drive the raw log-std outputs far past the clamp
  std::vector<double> bias = m.posterior().biases(1);
  for (std::size_t j = static_cast<std::size_t>(cfg.stoch_dim); j < bias.size(); ++j)
    bias[j] = 1000.0;
  m.posterior().set_biases(1, bias);

  Rng data(11);
  const std::vector<double> obs = random_obs_vec(cfg.obs, data);
  const State mean_state = m.observe_mean(m.initial_state(), -1, obs);
  double max_dev = 0.0;
  Rng noise(12);
  for (int t = 0; t < 300; ++t) {
    const State s = m.observe(m.initial_state(), -1, obs, noise);
    for (std::size_t j = 0; j < s.z.size(); ++j) {
      CHECK(std::isfinite(s.z[j]));
      max_dev = std::max(max_dev, std::abs(s.z[j] - mean_state.z[j]));
    }
  }
  // std is clamped to exp(logstd_max), not exp(1000)
  CHECK(max_dev < 8.0 * std::exp(m.config().logstd_max));
  CHECK(max_dev > 0.5);
}

TEST_CASE("a length one window yields one state per sequence") {
  Rng init(13);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);
  Rng data(14), noise(15);
  const SequenceBatch batch = make_batch(cfg, 3, 1, data);
  const TrainOutput out = m.train_step(batch, noise);
  CHECK(out.states.size() == 3);
  CHECK(out.post_mean.size() == 3 * static_cast<std::size_t>(cfg.stoch_dim));
  CHECK(out.sem_pred.size() == 3);
  CHECK(std::isfinite(out.losses.total));
  CHECK(out.losses.applied);
}

TEST_CASE("sequence batches are validated") {
  Rng init(16);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);
  Rng data(17), noise(18);

  SequenceBatch empty;
  CHECK_THROWS_AS(m.train_step(empty, noise), std::invalid_argument);

  SequenceBatch bad = make_batch(cfg, 2, 3, data);
  bad.actions.pop_back();
  CHECK_THROWS_AS(m.train_step(bad, noise), std::invalid_argument);

  SequenceBatch short_obs = make_batch(cfg, 2, 3, data);
  short_obs.obs.pop_back();
  CHECK_THROWS_AS(m.sequence_loss(short_obs, noise), std::invalid_argument);

  SequenceBatch wrong_dim = make_batch(cfg, 2, 3, data);
  wrong_dim.obs_dim -= 1;
  wrong_dim.obs.resize(wrong_dim.steps() * static_cast<std::size_t>(wrong_dim.obs_dim));
  CHECK_THROWS_AS(m.train_step(wrong_dim, noise), std::invalid_argument);
}

TEST_CASE("loss components stay finite and sum to the total") {
  Rng init(19);
  RssmConfig cfg = tiny_config();
  cfg.obs = ObsSpec{4, 3};
  cfg.recon_scale = 0.7;
  cfg.kl_scale = 1.3;
  cfg.reward_scale = 0.5;
  cfg.cont_scale = 2.0;
  cfg.sem_scale = 0.3;
  cfg.free_bits = 0.5;
  WorldModel m(cfg, init);
  Rng data(20), noise(21);
  for (int step = 0; step < 1000; ++step) {
    const SequenceBatch batch = make_batch(cfg, 2, 4, data);
    const TrainOutput out = m.train_step(batch, noise);
    const LossBreakdown& l = out.losses;
    for (double v : {l.total, l.recon, l.kl, l.kl_raw, l.reward, l.cont, l.sem})
      REQUIRE(std::isfinite(v));
    const double sum = cfg.recon_scale * l.recon + cfg.kl_scale * l.kl +
                       cfg.reward_scale * l.reward + cfg.cont_scale * l.cont +
                       cfg.sem_scale * l.sem;
    REQUIRE(std::abs(l.total - sum) < 1e-10);
    REQUIRE(l.applied);
  }
  CHECK(m.params_finite());
}

TEST_CASE("train step losses agree with the standalone loss evaluation") {
  Rng init(22);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);
  Rng data(23);
  const SequenceBatch batch = make_batch(cfg, 2, 4, data);
  Rng e1(99);
  const double standalone = m.sequence_loss(batch, e1);
  Rng e2(99);
  const TrainOutput out = m.train_step(batch, e2);
  CHECK(out.losses.total == doctest::Approx(standalone).epsilon(1e-9));
}

TEST_CASE("training reduces the loss on a fixed batch") {
  Rng init(24);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);
  Rng data(25);
  const SequenceBatch batch = make_batch(cfg, 2, 8, data);

  Rng e0(777);
  const double before = m.sequence_loss(batch, e0);
  Rng noise(26);
  for (int step = 0; step < 200; ++step) m.train_step(batch, noise);
  Rng e1(777);
  const double after = m.sequence_loss(batch, e1);
  CHECK(after < before);
  CHECK(after < 0.8 * before);
}

TEST_CASE("reconstruction collapses when capacity exceeds the data") {
  Rng init(27);
  RssmConfig cfg = tiny_config();
  cfg.obs = ObsSpec{6, 4};
  cfg.det_dim = 12;
  cfg.stoch_dim = 4;
  cfg.hidden = 24;
  cfg.kl_scale = 0.0;
  cfg.reward_scale = 0.0;
  cfg.cont_scale = 0.0;
  cfg.sem_scale = 0.0;
  cfg.lr = 3e-3;
  WorldModel m(cfg, init);
  Rng data(28);
  const SequenceBatch batch = make_batch(cfg, 2, 6, data);

  Rng noise(29);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 800; ++step) {
    const TrainOutput out = m.train_step(batch, noise);
    if (step == 0) first = out.losses.recon;
    last = out.losses.recon;
  }
  CHECK(last < 0.1 * first);
}

TEST_CASE("reward and semantic losses never move the trunk") {
  Rng data(30);

  SUBCASE("semantic-only step") {
    Rng init(31);
    RssmConfig cfg = tiny_config();
    cfg.recon_scale = cfg.kl_scale = cfg.reward_scale = cfg.cont_scale = 0.0;
    cfg.sem_scale = 1.0;
    WorldModel m(cfg, init);
    const SequenceBatch batch = make_batch(cfg, 2, 4, data);
    const std::vector<double> trunk_before = m.trunk_params();
    const std::vector<double> sem_before(m.semantic_head().params().begin(),
                                         m.semantic_head().params().end());
    Rng noise(32);
    m.train_step(batch, noise);
    CHECK(m.trunk_params() == trunk_before);
    CHECK(std::vector<double>(m.semantic_head().params().begin(),
                              m.semantic_head().params().end()) != sem_before);
  }

  SUBCASE("reward-only step") {
    Rng init(33);
    RssmConfig cfg = tiny_config();
    cfg.recon_scale = cfg.kl_scale = cfg.sem_scale = cfg.cont_scale = 0.0;
    cfg.reward_scale = 1.0;
    WorldModel m(cfg, init);
    const SequenceBatch batch = make_batch(cfg, 2, 4, data);
    const std::vector<double> trunk_before = m.trunk_params();
    Rng noise(34);
    m.train_step(batch, noise);
    CHECK(m.trunk_params() == trunk_before);
  }

  SUBCASE("reconstruction does move the trunk") {
    Rng init(35);
    RssmConfig cfg = tiny_config();
    cfg.kl_scale = cfg.reward_scale = cfg.sem_scale = cfg.cont_scale = 0.0;
    cfg.recon_scale = 1.0;
    WorldModel m(cfg, init);
    const SequenceBatch batch = make_batch(cfg, 2, 4, data);
    const std::vector<double> trunk_before = m.trunk_params();
    Rng noise(36);
    m.train_step(batch, noise);
    CHECK(m.trunk_params() != trunk_before);
  }
}

TEST_CASE("head gradients stop at the trunk boundary analytically") {
  Rng init(37);
  RssmConfig cfg = tiny_config();
  cfg.recon_scale = cfg.kl_scale = cfg.cont_scale = 0.0;
  cfg.reward_scale = 1.0;
  cfg.sem_scale = 1.0;
  WorldModel m(cfg, init);
  Rng data(38);
  const SequenceBatch batch = make_batch(cfg, 2, 3, data);

  std::vector<double> grad;
  Rng noise(39);
  m.loss_and_gradient(batch, noise, grad);

  const std::size_t trunk_len = m.encoder().param_count() + m.gru().param_count() +
                                m.posterior().param_count() + m.prior().param_count() +
                                m.decoder().param_count();
  for (std::size_t i = 0; i < trunk_len; ++i) REQUIRE(grad[i] == 0.0);
  double head_mass = 0.0;
  for (std::size_t i = trunk_len; i < grad.size(); ++i) head_mass += std::abs(grad[i]);
  CHECK(head_mass > 0.0);
}

TEST_CASE("world model gradients pass finite differences") {
  Rng data(40);

  SUBCASE("trunk losses") {
    Rng init(41);
    RssmConfig cfg = tiny_config();
    cfg.reward_scale = 0.0;
    cfg.sem_scale = 0.0;  // only losses whose gradients cross the trunk
    WorldModel m(cfg, init);
    const SequenceBatch batch = make_batch(cfg, 2, 3, data);

    std::vector<double> grad;
    Rng g1(555);
    m.loss_and_gradient(batch, g1, grad);

    std::vector<double> params = m.all_params();
    const auto f = [&]() {
      m.set_all_params(params);
      Rng r(555);
      return m.sequence_loss(batch, r);
    };
    const test::FdResult fd = test::fd_check(params, grad, f);
    CHECK(fd.checked > 300);
    CHECK(fd.max_rel_err < 1e-4);
  }

  SUBCASE("reward and semantic heads") {
    Rng init(42);
    RssmConfig cfg = tiny_config();
    cfg.recon_scale = cfg.kl_scale = cfg.cont_scale = 0.0;
    cfg.reward_scale = 1.0;
    cfg.sem_scale = 1.0;
    WorldModel m(cfg, init);
    const SequenceBatch batch = make_batch(cfg, 2, 3, data);

    std::vector<double> grad;
    Rng g1(556);
    m.loss_and_gradient(batch, g1, grad);

    std::vector<double> params = m.all_params();
    const std::size_t head_off = m.encoder().param_count() + m.gru().param_count() +
                                 m.posterior().param_count() + m.prior().param_count() +
                                 m.decoder().param_count();
    const auto f = [&]() {
      m.set_all_params(params);
      Rng r(556);
      return m.sequence_loss(batch, r);
    };
    // perturb only the head blocks; the trunk is frozen by construction
    const std::span<double> head_params(params.data() + head_off, params.size() - head_off);
    const std::span<const double> head_grad(grad.data() + head_off, grad.size() - head_off);
    const test::FdResult fd = test::fd_check(head_params, head_grad, f);
    CHECK(fd.checked > 50);
    CHECK(fd.max_rel_err < 1e-4);
  }
}

TEST_CASE("rejected updates leave parameters untouched") {
  Rng init(43);
  const RssmConfig cfg = tiny_config();
  WorldModel m(cfg, init);
  Rng data(44);
  SequenceBatch batch = make_batch(cfg, 2, 3, data);
  batch.obs[1] = std::numeric_limits<double>::quiet_NaN();

  const std::vector<double> before = m.all_params();
  Rng noise(45);
  const TrainOutput out = m.train_step(batch, noise);
  CHECK_FALSE(out.losses.applied);
  CHECK(m.all_params() == before);

  // and a clean batch still trains afterwards
  const SequenceBatch ok = make_batch(cfg, 2, 3, data);
  Rng noise2(46);
  CHECK(m.train_step(ok, noise2).losses.applied);
  CHECK(m.all_params() != before);
}

TEST_CASE("ensemble members train independently") {
  Rng i1(47), i2(47);
  const RssmConfig cfg = tiny_config();
  EnsembleConfig ecfg;
  ecfg.members = 3;
  ecfg.hidden = 8;
  Ensemble a(cfg, ecfg, i1);
  Ensemble b(cfg, ecfg, i2);
  for (double& v : b.member(1).params()) v += 0.25;  // only member 1 differs

  Rng data(48);
  WorldModel m(cfg, data);
  std::vector<State> states;
  std::vector<std::vector<double>> targets;
  for (int t = 0; t < 6; ++t) {
    Rng obs_rng(static_cast<std::uint64_t>(100 + t));
    State s = m.initial_state();
    s = m.observe(s, -1, random_obs_vec(cfg.obs, obs_rng), obs_rng);
    states.push_back(std::move(s));
    std::vector<double> tgt(static_cast<std::size_t>(cfg.stoch_dim));
    for (double& v : tgt) v = obs_rng.normal();
    targets.push_back(std::move(tgt));
  }
  std::vector<EnsembleSample> batch;
  for (std::size_t t = 0; t < states.size(); ++t)
    batch.push_back(EnsembleSample{&states[t], static_cast<int>(t) % cfg.num_actions,
                                   targets[t].data()});

  for (int step = 0; step < 5; ++step) {
    a.train_step(batch);
    b.train_step(batch);
  }
  const auto pa = a.member(0).params(), pb = b.member(0).params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
  CHECK(std::vector<double>(a.member(1).params().begin(), a.member(1).params().end()) !=
        std::vector<double>(b.member(1).params().begin(), b.member(1).params().end()));
}

TEST_CASE("ensemble disagreement decays to zero on a single transition") {
  Rng init(49);
  const RssmConfig cfg = tiny_config();
  EnsembleConfig ecfg;
  ecfg.members = 4;
  ecfg.hidden = 8;
  ecfg.lr = 3e-3;
  Ensemble e(cfg, ecfg, init);

  Rng data(50);
  WorldModel m(cfg, data);
  State s = m.observe(m.initial_state(), -1, random_obs_vec(cfg.obs, data), data);
  std::vector<double> target(static_cast<std::size_t>(cfg.stoch_dim), 0.3);
  const std::vector<EnsembleSample> batch{EnsembleSample{&s, 1, target.data()}};

  const double fresh = e.disagreement(s, 1);
  CHECK(fresh > 0.0);

  double last_loss = 0.0;
  for (int step = 0; step < 600; ++step) last_loss = e.train_step(batch);
  CHECK(e.disagreement(s, 1) < 1e-3);
  CHECK(last_loss < 1e-4);

  const auto preds = e.predict(s, 1);
  REQUIRE(preds.size() == 4);
  for (const auto& p : preds) {
    REQUIRE(p.size() == target.size());
    for (std::size_t j = 0; j < p.size(); ++j)
      CHECK(p[j] == doctest::Approx(target[j]).epsilon(0.05));
  }
}

TEST_CASE("disagreement matches the population variance by hand") {
  Rng init(51);
  RssmConfig cfg = tiny_config();
  cfg.stoch_dim = 2;
  EnsembleConfig ecfg;
  ecfg.members = 2;
  ecfg.hidden = 4;
  Ensemble e(cfg, ecfg, init);

  // constant members: zero weights, chosen output biases
  e.member(0).init_zero();
  e.member(1).init_zero();
  const State s{std::vector<double>(static_cast<std::size_t>(cfg.det_dim), 0.4),
                std::vector<double>(static_cast<std::size_t>(cfg.stoch_dim), -0.2)};

  e.member(1).set_biases(1, {2.0, 2.0});
  // members predict (0,0) and (2,2): per-dim mean 1, population variance 1
  CHECK(e.disagreement(s, 0) == 1.0);

  e.member(1).set_biases(1, {0.0, 0.0});
  CHECK(e.disagreement(s, 0) == 0.0);

  // scaling every prediction by 3 scales the variance by 9
  e.member(1).set_biases(1, {6.0, 6.0});
  CHECK(e.disagreement(s, 0) == 9.0);

  CHECK_THROWS_AS(e.disagreement(s, -1), std::invalid_argument);
  CHECK_THROWS_AS(e.disagreement(s, cfg.num_actions), std::invalid_argument);
}

TEST_CASE("disagreement is non negative and trends down during training") {
  Rng init(52);
  const RssmConfig cfg = tiny_config();
  EnsembleConfig ecfg;
  ecfg.members = 4;
  ecfg.hidden = 8;
  Ensemble e(cfg, ecfg, init);

  Rng data(53);
  WorldModel m(cfg, data);
  std::vector<State> states;
  std::vector<std::vector<double>> targets;
  for (int t = 0; t < 12; ++t) {
    states.push_back(m.observe(m.initial_state(), -1, random_obs_vec(cfg.obs, data), data));
    std::vector<double> tgt(static_cast<std::size_t>(cfg.stoch_dim));
    for (double& v : tgt) v = data.normal() * 0.3;
    targets.push_back(std::move(tgt));
  }
  std::vector<EnsembleSample> batch;
  for (std::size_t t = 0; t < states.size(); ++t)
    batch.push_back(EnsembleSample{&states[t], static_cast<int>(t) % cfg.num_actions,
                                   targets[t].data()});

  const auto mean_dis = [&]() {
    double total = 0.0;
    for (const EnsembleSample& smp : batch) {
      const double d = e.disagreement(*smp.state, smp.action);
      CHECK(d >= 0.0);
      total += d;
    }
    return total / static_cast<double>(batch.size());
  };

  double early = 0.0, late = 0.0;
  for (int step = 0; step < 300; ++step) {
    e.train_step(batch);
    if (step < 75) early += mean_dis();
    if (step >= 225) late += mean_dis();
  }
  CHECK(late < early);
}

TEST_CASE("ensemble member gradients pass finite differences") {
  Rng init(54);
  const RssmConfig cfg = tiny_config();
  EnsembleConfig ecfg;
  ecfg.members = 2;
  ecfg.hidden = 6;
  Ensemble e(cfg, ecfg, init);

  Rng data(55);
  WorldModel m(cfg, data);
  std::vector<State> states;
  std::vector<std::vector<double>> targets;
  for (int t = 0; t < 4; ++t) {
    states.push_back(m.observe(m.initial_state(), -1, random_obs_vec(cfg.obs, data), data));
    std::vector<double> tgt(static_cast<std::size_t>(cfg.stoch_dim));
    for (double& v : tgt) v = data.normal();
    targets.push_back(std::move(tgt));
  }
  std::vector<EnsembleSample> batch;
  for (std::size_t t = 0; t < states.size(); ++t)
    batch.push_back(EnsembleSample{&states[t], static_cast<int>(t) % cfg.num_actions,
                                   targets[t].data()});

  std::vector<double> grad;
  e.member_loss(0, batch, &grad);
  const auto f = [&]() { return e.member_loss(0, batch); };
  const test::FdResult fd = test::fd_check(e.member(0).params(), grad, f);
  CHECK(fd.checked > 20);
  CHECK(fd.max_rel_err < 1e-4);

  CHECK_THROWS_AS(e.member_loss(0, {}), std::invalid_argument);
}

TEST_CASE("the semantic head learns to rank interest levels") {
  Rng init(56);
  RssmConfig cfg;  // grid-sized observations
  cfg.det_dim = 16;
  cfg.stoch_dim = 6;
  cfg.hidden = 24;
  cfg.lr = 3e-3;
  cfg.sem_scale = 2.0;
  WorldModel m(cfg, init);

  // pool of observations with known interest, 10 per level
  Rng data(57);
  std::vector<grid::Observation> pool;
  std::vector<double> level;
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 10; ++i) {
      pool.push_back(test::obs_at_level(l, data));
      level.push_back(static_cast<double>(l));
    }

  const auto build_batch = [&](Rng& rng) {
    SequenceBatch b;
    b.batch = 4;
    b.len = 4;
    b.obs_dim = cfg.obs.encoded_dim();
    for (int s = 0; s < b.batch; ++s)
      for (int t = 0; t < b.len; ++t) {
        const std::size_t pick = rng.uniform_index(pool.size());
        const std::vector<double> enc = pool[pick].encode();
        b.obs.insert(b.obs.end(), enc.begin(), enc.end());
        b.actions.push_back(t == 0 ? -1 : static_cast<int>(rng.uniform_index(
                                              static_cast<std::size_t>(cfg.num_actions))));
        b.reward.push_back(0.0);
        b.cont.push_back(1.0);
        b.sem.push_back(level[pick]);
      }
    return b;
  };

  Rng train_rng(58), noise(59);
  for (int step = 0; step < 250; ++step) {
    const SequenceBatch b = build_batch(train_rng);
    m.train_step(b, noise);
  }

  std::vector<double> predicted;
  for (const grid::Observation& o : pool) {
    const State s = m.observe_mean(m.initial_state(), -1, o.encode());
    predicted.push_back(m.predict_sem(s));
  }
  CHECK(spearman(predicted, level) > 0.5);
}

TEST_CASE("world model and ensemble checkpoints round trip") {
  Rng init(60);
  RssmConfig cfg = tiny_config();
  cfg.free_bits = 0.7;
  cfg.kl_scale = 1.2;
  WorldModel m(cfg, init);
  EnsembleConfig ecfg;
  ecfg.members = 3;
  ecfg.hidden = 8;
  Ensemble e(cfg, ecfg, init);

  const auto dir = test::fresh_dir("wm_ckpt");
  const std::string path = (dir / "model.semex").string();
  {
    nn::CheckpointWriter w;
    m.add_to_checkpoint(w, "wm/");
    e.add_to_checkpoint(w, "ens/");
    w.write(path);
  }
  nn::CheckpointReader r(path);
  WorldModel m2 = WorldModel::from_checkpoint(r, "wm/");
  Ensemble e2 = Ensemble::from_checkpoint(r, "ens/");

  CHECK(m2.config().free_bits == cfg.free_bits);
  CHECK(m2.config().kl_scale == cfg.kl_scale);
  CHECK(m2.config().det_dim == cfg.det_dim);
  CHECK(m2.all_params() == m.all_params());
  CHECK(e2.members() == e.members());

  Rng data(61);
  const std::vector<double> obs = random_obs_vec(cfg.obs, data);
  Rng n1(62), n2(62);
  const State s1 = m.observe(m.initial_state(), -1, obs, n1);
  const State s2 = m2.observe(m2.initial_state(), -1, obs, n2);
  CHECK(s1.h == s2.h);
  CHECK(s1.z == s2.z);
  CHECK(e.disagreement(s1, 1) == e2.disagreement(s2, 1));
  CHECK(m.predict_sem(s1) == m2.predict_sem(s2));

  CHECK_THROWS_AS(WorldModel::from_checkpoint(r, "ens/"), std::runtime_error);
}
