#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string_view>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "semex/annotate/annotate.hpp"
#include "semex/motif/motif.hpp"
#include "semex/util/hash.hpp"

using namespace semex;
using namespace semex::motif;
using annotate::AnnotatedPair;
using annotate::Choice;

namespace {

double ref_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

AnnotatedPair make_pair(const grid::Observation& a, const grid::Observation& b) {
  AnnotatedPair p;
  p.a = a;
  p.b = b;
  p.choice = annotate::oracle_annotate(a, b);
  p.annotator = "oracle";
  return p;
}

// Synthetic corpus across all interest levels, labeled by the rule oracle.
std::vector<AnnotatedPair> make_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AnnotatedPair> out;
  out.reserve(n);
  while (out.size() < n) {
    const int la = static_cast<int>(rng.uniform_index(4));
    const int lb = static_cast<int>(rng.uniform_index(4));
    out.push_back(make_pair(test::obs_at_level(la, rng), test::obs_at_level(lb, rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("equal scores with a tie target cost ln 2") {
  const PreferenceLoss pl = preference_loss(0.3, 0.3, 0.5);
  CHECK(pl.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(pl.d_ra == doctest::Approx(0.0));
}

TEST_CASE("preference loss matches the softplus closed form") {
  CHECK(preference_loss(1.0, 0.0, 1.0).loss ==
        doctest::Approx(0.3132616875182228).epsilon(1e-14));
  CHECK(preference_loss(1.0, 0.0, 0.0).loss ==
        doctest::Approx(1.3132616875182228).epsilon(1e-14));
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const double ra = rng.normal() * 2.0, rb = rng.normal() * 2.0;
    const double y = rng.uniform();
    const double d = ra - rb;
    const double want = y * ref_softplus(-d) + (1.0 - y) * ref_softplus(d);
    CHECK(preference_loss(ra, rb, y).loss == doctest::Approx(want).epsilon(1e-13));
  }
  CHECK_THROWS_AS(preference_loss(0.0, 0.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(preference_loss(0.0, 0.0, 1.5), std::invalid_argument);
}

TEST_CASE("preference gradient is the sigmoid residual and survives finite differences") {
  Rng rng(78);
  for (int t = 0; t < 50; ++t) {
    const double ra = rng.normal(), rb = rng.normal();
    const double y = rng.uniform();
    const PreferenceLoss pl = preference_loss(ra, rb, y);
    CHECK(pl.d_ra == doctest::Approx(ref_sigmoid(ra - rb) - y).epsilon(1e-12));

    const double eps = 1e-6;
    const double fd_a =
        (preference_loss(ra + eps, rb, y).loss - preference_loss(ra - eps, rb, y).loss) /
        (2.0 * eps);
    const double fd_b =
        (preference_loss(ra, rb + eps, y).loss - preference_loss(ra, rb - eps, y).loss) /
        (2.0 * eps);
    CHECK(pl.d_ra == doctest::Approx(fd_a).epsilon(1e-6));
    CHECK(-pl.d_ra == doctest::Approx(fd_b).epsilon(1e-6));
  }
}

TEST_CASE("extreme score gaps stay finite") {
  const PreferenceLoss sure_right = preference_loss(1000.0, 0.0, 1.0);
  CHECK(std::isfinite(sure_right.loss));
  CHECK(sure_right.loss < 1e-300);
  CHECK(sure_right.d_ra == doctest::Approx(0.0));

  const PreferenceLoss sure_wrong = preference_loss(-1000.0, 0.0, 1.0);
  CHECK(std::isfinite(sure_wrong.loss));
  CHECK(sure_wrong.loss == doctest::Approx(1000.0));
  CHECK(sure_wrong.d_ra == doctest::Approx(-1.0));
}

TEST_CASE("shifting both scores by a constant changes nothing") {
  // dyadic inputs so the shifted difference is bit-identical
  for (double y : {0.0, 0.25, 0.5, 1.0}) {
    for (double shift : {1.0, 4.0, -8.0}) {
      const PreferenceLoss base = preference_loss(0.5, 0.25, y);
      const PreferenceLoss moved = preference_loss(0.5 + shift, 0.25 + shift, y);
      CHECK(base.loss == moved.loss);
      CHECK(base.d_ra == moved.d_ra);
    }
  }
}

TEST_CASE("swapping the pair mirrors the target") {
  Rng rng(79);
  for (int t = 0; t < 50; ++t) {
    const double ra = rng.normal(), rb = rng.normal();
    const double y = rng.uniform();
    const PreferenceLoss fwd = preference_loss(ra, rb, y);
    const PreferenceLoss rev = preference_loss(rb, ra, 1.0 - y);
    CHECK(fwd.loss == rev.loss);  // exact: same products, commuted sum
    CHECK(fwd.d_ra == doctest::Approx(-rev.d_ra).epsilon(1e-12));
  }
}

TEST_CASE("choice targets map to soft labels and reject none") {
  CHECK(choice_target(Choice::first) == 1.0);
  CHECK(choice_target(Choice::second) == 0.0);
  CHECK(choice_target(Choice::both) == 0.5);
  CHECK_THROWS_AS(choice_target(Choice::none), std::invalid_argument);
}

TEST_CASE("distillation loss gradient passes finite differences") {
  Rng rng(80);
  RewardNetConfig cfg;
  cfg.hidden = {6};
  RewardNet net(cfg, rng);

  std::vector<AnnotatedPair> batch;
  while (batch.size() < 8) {
    AnnotatedPair p = make_pair(test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng),
                                test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng));
    if (p.choice != Choice::none) batch.push_back(std::move(p));
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const auto loss_of = [&]() {
    double total = 0.0;
    for (const AnnotatedPair& p : batch)
      total += preference_loss(net.score(p.a), net.score(p.b), choice_target(p.choice)).loss;
    return total * inv_n;
  };

  std::vector<double> grad(net.net().param_count(), 0.0);
  for (const AnnotatedPair& p : batch) {
    nn::DenseNet::Cache ca, cb;
    const double ra = net.net().forward(p.a.encode(), &ca)[0];
    const double rb = net.net().forward(p.b.encode(), &cb)[0];
    const double d_ra = preference_loss(ra, rb, choice_target(p.choice)).d_ra * inv_n;
    const std::vector<double> da{d_ra}, db{-d_ra};
    net.net().backward(ca, da, grad);
    net.net().backward(cb, db, grad);
  }

  const test::FdResult fd = test::fd_check(net.net().params(), grad, loss_of);
  CHECK(fd.checked > 100);
  CHECK(fd.max_rel_err < 1e-4);
}

TEST_CASE("a linearly separable preference set is ranked perfectly") {
  Rng rng(81);
  std::vector<AnnotatedPair> data;
  for (int i = 0; i < 300; ++i) {
    const grid::Observation hi = test::obs_level2(rng);
    const grid::Observation lo = test::obs_level0(rng);
    data.push_back(i % 2 == 0 ? make_pair(hi, lo) : make_pair(lo, hi));
  }
  RewardNetConfig cfg;
  cfg.hidden = {16};
  cfg.lr = 3e-3;
  cfg.epochs = 25;
  auto [net, report] = train_reward_net(data, cfg, 4);
  CHECK(report.holdout_ranking_accuracy == doctest::Approx(1.0));
  const double acc = ranking_accuracy([&](const grid::Observation& o) { return net.score(o); }, data);
  CHECK(acc >= 0.999);
}

TEST_CASE("oracle preferences are recovered from a modest corpus") {
  const std::vector<AnnotatedPair> data = make_corpus(1500, 5);
  RewardNetConfig cfg;
  cfg.hidden = {32};
  cfg.lr = 2e-3;
  cfg.epochs = 15;
  auto [net, report] = train_reward_net(data, cfg, 6);
  CHECK(report.holdout_ranking_accuracy >= 0.8);
  CHECK(report.train_pairs + report.val_pairs <= data.size());
  CHECK(report.val_pairs > 0);
}

TEST_CASE("training is deterministic in data and seed") {
  const std::vector<AnnotatedPair> data = make_corpus(120, 7);
  RewardNetConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 4;
  auto [n1, r1] = train_reward_net(data, cfg, 11);
  auto [n2, r2] = train_reward_net(data, cfg, 11);
  REQUIRE(n1.net().param_count() == n2.net().param_count());
  const auto p1 = n1.net().params(), p2 = n2.net().params();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
  CHECK(r1.selected_epoch == r2.selected_epoch);
  CHECK(r1.val_loss == r2.val_loss);
}

TEST_CASE("duplicating every pair keeps the selected epoch") {
  Rng rng(82);
  // groups of identical pairs so any stratified subset has the same content
  const AnnotatedPair p1 = make_pair(test::obs_level2(rng), test::obs_level0(rng));
  const AnnotatedPair p2 = make_pair(test::obs_level0(rng), test::obs_level3(rng));
  REQUIRE(p1.choice == Choice::first);
  REQUIRE(p2.choice == Choice::second);

  std::vector<AnnotatedPair> base;
  for (int i = 0; i < 10; ++i) {
    base.push_back(p1);
    base.push_back(p2);
  }
  std::vector<AnnotatedPair> doubled = base;
  doubled.insert(doubled.end(), base.begin(), base.end());

  RewardNetConfig cfg;
  cfg.hidden = {8};
  cfg.full_batch = true;
  cfg.lr = 0.3;
  cfg.weight_decay = 0.0;
  cfg.epochs = 10;
  auto [na, ra] = train_reward_net(base, cfg, 21);
  auto [nb, rb] = train_reward_net(doubled, cfg, 21);
  CHECK(ra.selected_epoch == rb.selected_epoch);
  REQUIRE(ra.val_loss.size() == rb.val_loss.size());
  for (std::size_t e = 0; e < ra.val_loss.size(); ++e)
    CHECK(ra.val_loss[e] == doctest::Approx(rb.val_loss[e]).epsilon(1e-9));
}

TEST_CASE("full batch descent gives a monotone training curve") {
  const std::vector<AnnotatedPair> data = make_corpus(60, 9);
  RewardNetConfig cfg;
  cfg.hidden = {8};
  cfg.full_batch = true;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  cfg.epochs = 20;
  auto [net, report] = train_reward_net(data, cfg, 13);
  REQUIRE(report.train_loss.size() == 20);
  for (std::size_t e = 1; e < report.train_loss.size(); ++e)
    CHECK(report.train_loss[e] <= report.train_loss[e - 1] + 1e-12);
}

TEST_CASE("the selected epoch minimizes validation loss") {
  const std::vector<AnnotatedPair> data = make_corpus(200, 10);
  RewardNetConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 8;
  auto [net, report] = train_reward_net(data, cfg, 14);
  REQUIRE(report.selected_epoch >= 0);
  const auto it = std::min_element(report.val_loss.begin(), report.val_loss.end());
  CHECK(report.selected_epoch == static_cast<int>(it - report.val_loss.begin()));
}

TEST_CASE("scores are deterministic and survive a checkpoint") {
  Rng rng(83);
  RewardNetConfig cfg;
  cfg.hidden = {12};
  RewardNet net(cfg, rng);
  const grid::Observation probe = test::obs_level3(rng);
  CHECK(net.score(probe) == net.score(probe));

  const std::filesystem::path dir = test::fresh_dir("motif_ckpt");
  const std::string path = (dir / "reward_net.bin").string();
  TrainReport report;
  report.selected_epoch = 3;
  net.save(path, report, 2, 0xabcdef12u);
  CHECK(std::filesystem::exists(path));
  CHECK(std::filesystem::exists(path + ".meta.json"));

  const RewardNet back = RewardNet::load(path);
  CHECK(back.generation() == 2);
  CHECK(back.dataset_hash() == 0xabcdef12u);
  for (int t = 0; t < 20; ++t) {
    const grid::Observation o = test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng);
    CHECK(back.score(o) == net.score(o));
  }
}

TEST_CASE("a zero network scores zero and ranks at exactly one half") {
  Rng rng(84);
  RewardNetConfig cfg;
  cfg.hidden = {8};
  RewardNet net(cfg, rng);
  net.net().init_zero();
  CHECK(net.score(test::obs_level3(rng)) == 0.0);
  CHECK(net.score(test::obs_level0(rng)) == 0.0);

  std::vector<AnnotatedPair> ordered;
  while (ordered.size() < 40) {
    AnnotatedPair p = make_pair(test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng),
                                test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng));
    if (p.choice == Choice::first || p.choice == Choice::second) ordered.push_back(std::move(p));
  }
  const double acc =
      ranking_accuracy([&](const grid::Observation& o) { return net.score(o); }, ordered);
  CHECK(acc == 0.5);
}

TEST_CASE("ranking accuracy scores the oracle itself at one") {
  Rng rng(85);
  const std::vector<AnnotatedPair> data = make_corpus(400, 15);
  const double acc = ranking_accuracy(
      [](const grid::Observation& o) { return static_cast<double>(annotate::interestingness_level(o)); },
      data);
  CHECK(acc == 1.0);

  // an arbitrary scorer with no signal hovers near chance on balanced pairs
  const double noise = ranking_accuracy(
      [](const grid::Observation& o) {
        const std::string_view bytes(reinterpret_cast<const char*>(o.window.data()),
                                     o.window.size() * sizeof(o.window[0]));
        return static_cast<double>(fnv1a64(bytes) % 1024);
      },
      data);
  CHECK(noise > 0.35);
  CHECK(noise < 0.65);
}

TEST_CASE("stratified split keeps every label on both sides") {
  const std::vector<AnnotatedPair> data = make_corpus(300, 16);
  const SplitIndices split = stratified_split(data, 0.10, 3);

  std::set<std::size_t> seen;
  for (std::size_t i : split.train) seen.insert(i);
  for (std::size_t i : split.val) seen.insert(i);
  CHECK(seen.size() == data.size());
  CHECK(split.train.size() + split.val.size() == data.size());

  std::set<Choice> val_labels, all_labels;
  for (std::size_t i : split.val) val_labels.insert(data[i].choice);
  for (const AnnotatedPair& p : data) all_labels.insert(p.choice);
  CHECK(val_labels == all_labels);

  const SplitIndices again = stratified_split(data, 0.10, 3);
  CHECK(again.train == split.train);
  CHECK(again.val == split.val);
  const SplitIndices other = stratified_split(data, 0.10, 4);
  CHECK(other.val != split.val);

  CHECK_THROWS_AS(stratified_split(data, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(stratified_split(data, -0.1, 0), std::invalid_argument);
}

TEST_CASE("training demands at least one usable pair") {
  Rng rng(86);
  std::vector<AnnotatedPair> all_none;
  for (int i = 0; i < 10; ++i) {
    AnnotatedPair p;
    p.a = test::obs_level0(rng);
    p.b = test::obs_level0(rng);
    p.choice = Choice::none;
    all_none.push_back(std::move(p));
  }
  RewardNetConfig cfg;
  CHECK_THROWS_AS(train_reward_net(all_none, cfg, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_reward_net({}, cfg, 1), std::invalid_argument);
}
