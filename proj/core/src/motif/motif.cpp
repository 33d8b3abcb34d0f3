#include "semex/motif/motif.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "semex/nn/adam.hpp"
#include "semex/nn/checkpoint.hpp"
#include "semex/util/hash.hpp"

namespace semex::motif {

namespace {

using nlohmann::json;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<int> net_sizes(const RewardNetConfig& cfg) {
  std::vector<int> sizes{grid::kObsDim};
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(1);
  return sizes;
}

}  // namespace

PreferenceLoss preference_loss(double r_a, double r_b, double target) {
  if (target < 0.0 || target > 1.0)
    throw std::invalid_argument("preference target must lie in [0, 1]");
  const double d = r_a - r_b;
  PreferenceLoss out;
  out.loss = target * softplus(-d) + (1.0 - target) * softplus(d);
  out.d_ra = sigmoid(d) - target;
  return out;
}

double choice_target(annotate::Choice c) {
  switch (c) {
    case annotate::Choice::first: return 1.0;
    case annotate::Choice::second: return 0.0;
    case annotate::Choice::both: return 0.5;
    case annotate::Choice::none:
      throw std::invalid_argument("'none' pairs carry no preference target");
  }
  throw std::logic_error("unknown choice");
}

RewardNet::RewardNet(const RewardNetConfig& cfg, Rng& rng)
    : cfg_(cfg), net_(net_sizes(cfg), cfg.activation, nn::Activation::identity) {
  net_.init_uniform(rng);
}

double RewardNet::score(const grid::Observation& o) const {
  return score_encoded(o.encode());
}

double RewardNet::score_encoded(std::span<const double> encoded) const {
  return net_.forward(encoded)[0];
}

void RewardNet::save(const std::string& path, const TrainReport& report,
                     int generation, std::uint64_t dataset_hash) const {
  json meta{{"kind", "reward_net"},
            {"generation", generation},
            {"dataset_hash", hex64(dataset_hash)},
            {"config",
             {{"hidden", cfg_.hidden},
              {"activation", nn::activation_name(cfg_.activation)},
              {"lr", cfg_.lr},
              {"weight_decay", cfg_.weight_decay},
              {"batch_size", cfg_.batch_size},
              {"epochs", cfg_.epochs},
              {"val_fraction", cfg_.val_fraction}}},
            {"report",
             {{"selected_epoch", report.selected_epoch},
              {"holdout_ranking_accuracy", report.holdout_ranking_accuracy},
              {"train_pairs", report.train_pairs},
              {"val_pairs", report.val_pairs},
              {"train_loss", report.train_loss},
              {"val_loss", report.val_loss}}}};

  nn::CheckpointWriter w;
  w.add_dense("net", net_);
  w.add_text("meta", meta.dump());
  w.write(path);

  std::ofstream side(path + ".meta.json", std::ios::binary | std::ios::trunc);
  if (!side) throw std::runtime_error("cannot write sidecar for " + path);
  side << meta.dump(2) << '\n';
}

RewardNet RewardNet::load(const std::string& path) {
  nn::CheckpointReader r(path);
  RewardNet net;
  net.net_ = r.dense("net");
  const json meta = json::parse(r.text("meta"));
  if (meta.value("kind", "") != "reward_net")
    throw std::runtime_error(path + " is not a reward net checkpoint");
  net.generation_ = meta.value("generation", 0);
  net.dataset_hash_ = std::stoull(meta.value("dataset_hash", "0"), nullptr, 16);
  const json& c = meta.at("config");
  net.cfg_.hidden = c.at("hidden").get<std::vector<int>>();
  net.cfg_.activation = nn::activation_from_name(c.at("activation").get<std::string>());
  net.cfg_.lr = c.at("lr").get<double>();
  net.cfg_.weight_decay = c.at("weight_decay").get<double>();
  net.cfg_.batch_size = c.at("batch_size").get<int>();
  net.cfg_.epochs = c.at("epochs").get<int>();
  net.cfg_.val_fraction = c.at("val_fraction").get<double>();
  return net;
}

SplitIndices stratified_split(const std::vector<annotate::AnnotatedPair>& data,
                              double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("val_fraction must lie in [0, 1)");
  Rng rng(seed);
  SplitIndices out;
  std::vector<std::vector<std::size_t>> groups(4);
  for (std::size_t i = 0; i < data.size(); ++i)
    groups[static_cast<std::size_t>(data[i].choice)].push_back(i);
  for (std::vector<std::size_t>& g : groups) {
    // Fisher-Yates with the shared stream.
    for (std::size_t i = g.size(); i > 1; --i)
      std::swap(g[i - 1], g[rng.uniform_index(i)]);
    std::size_t n_val = 0;
    if (g.size() >= 2 && val_fraction > 0.0) {
      n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(g.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, g.size() - 1);
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      (i < n_val ? out.val : out.train).push_back(g[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::pair<RewardNet, TrainReport> train_reward_net(
    const std::vector<annotate::AnnotatedPair>& data, const RewardNetConfig& cfg,
    std::uint64_t seed) {
  // 'none' answers carry no ordering signal and are dropped up front.
  std::vector<annotate::AnnotatedPair> usable;
  usable.reserve(data.size());
  for (const annotate::AnnotatedPair& p : data)
    if (p.choice != annotate::Choice::none) usable.push_back(p);
  if (usable.empty())
    throw std::invalid_argument("cannot train: no usable pairs (every choice is 'none')");

  Rng rng(seed);
  RewardNet net(cfg, rng);
  nn::DenseNet& dn = net.net();
  nn::Adam adam(dn.param_count(), cfg.lr);

  // Encode every observation once.
  std::vector<std::vector<double>> enc_a(usable.size()), enc_b(usable.size());
  std::vector<double> targets(usable.size());
  for (std::size_t i = 0; i < usable.size(); ++i) {
    enc_a[i] = usable[i].a.encode();
    enc_b[i] = usable[i].b.encode();
    targets[i] = choice_target(usable[i].choice);
  }

  const SplitIndices split = stratified_split(usable, cfg.val_fraction, rng.bits());
  const std::vector<std::size_t>& eval_set = split.val.empty() ? split.train : split.val;

  TrainReport report;
  report.train_pairs = split.train.size();
  report.val_pairs = split.val.size();

  auto mean_pref_loss = [&](const std::vector<std::size_t>& idx) {
    double sum = 0.0;
    for (std::size_t i : idx) {
      const double ra = dn.forward(enc_a[i])[0];
      const double rb = dn.forward(enc_b[i])[0];
      sum += preference_loss(ra, rb, targets[i]).loss;
    }
    return idx.empty() ? 0.0 : sum / static_cast<double>(idx.size());
  };

  std::vector<double> grad(dn.param_count());
  std::vector<double> best_params(dn.params().begin(), dn.params().end());
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order = split.train;
  nn::DenseNet::Cache cache_a, cache_b;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);

    const std::size_t bs = cfg.full_batch
                               ? std::max<std::size_t>(order.size(), 1)
                               : static_cast<std::size_t>(std::max(cfg.batch_size, 1));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(start + bs, order.size());
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const double ra = dn.forward(enc_a[i], &cache_a)[0];
        const double rb = dn.forward(enc_b[i], &cache_b)[0];
        const PreferenceLoss pl = preference_loss(ra, rb, targets[i]);
        epoch_loss += pl.loss;
        const double da[1] = {pl.d_ra * inv};
        const double db[1] = {-pl.d_ra * inv};
        dn.backward(cache_a, da, grad);
        dn.backward(cache_b, db, grad);
      }
      if (cfg.weight_decay > 0.0) {
        auto params = dn.params();
        for (std::size_t p = 0; p < grad.size(); ++p)
          grad[p] += cfg.weight_decay * params[p];
      }
      if (cfg.full_batch) {
        // Sanity mode: plain descent, so the epoch-loss curve is monotone.
        auto params = dn.params();
        for (std::size_t p = 0; p < grad.size(); ++p) params[p] -= cfg.lr * grad[p];
      } else {
        adam.step(dn.params(), grad);
      }
    }
    report.train_loss.push_back(
        order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size()));

    const double val = mean_pref_loss(eval_set);
    report.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      report.selected_epoch = epoch;
      best_params.assign(dn.params().begin(), dn.params().end());
    }
  }

  auto params = dn.params();
  std::copy(best_params.begin(), best_params.end(), params.begin());

  std::vector<annotate::AnnotatedPair> holdout;
  holdout.reserve(eval_set.size());
  for (std::size_t i : eval_set) holdout.push_back(usable[i]);
  report.holdout_ranking_accuracy =
      ranking_accuracy([&](const grid::Observation& o) { return net.score(o); }, holdout);

  return {std::move(net), std::move(report)};
}

double ranking_accuracy(const std::function<double(const grid::Observation&)>& scorer,
                        const std::vector<annotate::AnnotatedPair>& pairs) {
  std::size_t ordered = 0;
  double correct = 0.0;
  for (const annotate::AnnotatedPair& p : pairs) {
    if (p.choice == annotate::Choice::both || p.choice == annotate::Choice::none) continue;
    ++ordered;
    const double ra = scorer(p.a), rb = scorer(p.b);
    if (ra == rb) {
      correct += 0.5;  // tie convention: no order information, half credit
    } else if (p.choice == annotate::Choice::first ? ra > rb : rb > ra) {
      correct += 1.0;
    }
  }
  if (ordered == 0) return 0.5;  // no evidence either way
  return correct / static_cast<double>(ordered);
}

}  // namespace semex::motif
