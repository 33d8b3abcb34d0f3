#include "semex/wm/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semex::wm {

namespace {
using nlohmann::json;
}

Ensemble::Ensemble(const RssmConfig& model_cfg, const EnsembleConfig& cfg, Rng& rng)
    : cfg_(cfg), num_actions_(model_cfg.num_actions), stoch_dim_(model_cfg.stoch_dim) {
  if (cfg.members < 2) throw std::invalid_argument("ensemble needs at least 2 members");
  const int in = model_cfg.feature_dim() + model_cfg.num_actions;
  nets_.reserve(static_cast<std::size_t>(cfg.members));
  opts_.reserve(static_cast<std::size_t>(cfg.members));
  for (int n = 0; n < cfg.members; ++n) {
    nets_.emplace_back(std::vector<int>{in, cfg.hidden, model_cfg.stoch_dim},
                       nn::Activation::elu, nn::Activation::identity);
    nets_.back().init_uniform(rng);
    opts_.emplace_back(nets_.back().param_count(), cfg.lr);
  }
}

std::vector<double> Ensemble::input_vector(const State& s, int action) const {
  if (action < 0 || action >= num_actions_)
    throw std::invalid_argument("ensemble action out of range");
  std::vector<double> x = s.feature();
  x.resize(x.size() + static_cast<std::size_t>(num_actions_), 0.0);
  x[x.size() - static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(action)] = 1.0;
  return x;
}

std::vector<std::vector<double>> Ensemble::predict(const State& s, int action) const {
  const std::vector<double> x = input_vector(s, action);
  std::vector<std::vector<double>> out;
  out.reserve(nets_.size());
  for (const nn::DenseNet& n : nets_) out.push_back(n.forward(x));
  return out;
}

double Ensemble::disagreement(const State& s, int action) const {
  const std::vector<std::vector<double>> preds = predict(s, action);
  const double inv_n = 1.0 / static_cast<double>(preds.size());
  double total = 0.0;
  for (int j = 0; j < stoch_dim_; ++j) {
    double mean = 0.0;
    for (const auto& p : preds) mean += p[static_cast<std::size_t>(j)];
    mean *= inv_n;
    double var = 0.0;
    for (const auto& p : preds) {
      const double d = p[static_cast<std::size_t>(j)] - mean;
      var += d * d;
    }
    total += var * inv_n;  // population variance
  }
  return total / static_cast<double>(stoch_dim_);
}

double Ensemble::member_loss(int n, const std::vector<EnsembleSample>& batch,
                             std::vector<double>* grad) const {
  if (batch.empty()) throw std::invalid_argument("empty ensemble batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const nn::DenseNet& net = nets_.at(static_cast<std::size_t>(n));
  if (grad) grad->assign(net.param_count(), 0.0);
  nn::DenseNet::Cache cache;
  std::vector<double> dout(static_cast<std::size_t>(stoch_dim_));
  double loss = 0.0;
  for (const EnsembleSample& s : batch) {
    const std::vector<double> x = input_vector(*s.state, s.action);
    const std::vector<double> pred = net.forward(x, grad ? &cache : nullptr);
    for (int j = 0; j < stoch_dim_; ++j) {
      const double d = pred[static_cast<std::size_t>(j)] - s.target[j];
      loss += 0.5 * d * d;
      dout[static_cast<std::size_t>(j)] = d * inv_b;
    }
    if (grad) net.backward(cache, dout, *grad);
  }
  return loss * inv_b;
}

double Ensemble::train_step(const std::vector<EnsembleSample>& batch) {
  double mean_loss = 0.0;
  std::vector<double> grad;
  for (std::size_t n = 0; n < nets_.size(); ++n) {
    mean_loss += member_loss(static_cast<int>(n), batch, &grad);
    opts_[n].step(nets_[n].params(), grad);
  }
  return mean_loss / static_cast<double>(nets_.size());
}

void Ensemble::add_to_checkpoint(nn::CheckpointWriter& w, const std::string& prefix) const {
  json meta{{"kind", "ensemble"},
            {"members", cfg_.members},
            {"hidden", cfg_.hidden},
            {"lr", cfg_.lr},
            {"num_actions", num_actions_},
            {"stoch_dim", stoch_dim_}};
  w.add_text(prefix + "meta", meta.dump());
  for (std::size_t n = 0; n < nets_.size(); ++n)
    w.add_dense(prefix + "m" + std::to_string(n), nets_[n]);
}

Ensemble Ensemble::from_checkpoint(const nn::CheckpointReader& r, const std::string& prefix) {
  const json meta = json::parse(r.text(prefix + "meta"));
  if (meta.value("kind", "") != "ensemble")
    throw std::runtime_error("checkpoint section is not an ensemble");
  Ensemble e;
  e.cfg_.members = meta.at("members").get<int>();
  e.cfg_.hidden = meta.at("hidden").get<int>();
  e.cfg_.lr = meta.at("lr").get<double>();
  e.num_actions_ = meta.at("num_actions").get<int>();
  e.stoch_dim_ = meta.at("stoch_dim").get<int>();
  for (int n = 0; n < e.cfg_.members; ++n) {
    e.nets_.push_back(r.dense(prefix + "m" + std::to_string(n)));
    e.opts_.emplace_back(e.nets_.back().param_count(), e.cfg_.lr);
  }
  return e;
}

}  // namespace semex::wm
