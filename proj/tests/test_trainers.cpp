#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noisylab/harness.hpp"
#include "noisylab/trainers.hpp"
#include "oracles.hpp"

using namespace noisylab;

namespace {

// Shared tiny noisy-blobs workload.
struct Workload {
  Dataset train, test;
  CorruptionRecord record;

  explicit Workload(double noise_ratio = 0.2, int per_class = 40, int classes = 3) {
    Dataset all = make_blobs(per_class + 10, classes, 2, 0.1, 7);
    auto [tr, te] = split(all, static_cast<double>(per_class) / (per_class + 10), 5);
    train = std::move(tr);
    test = std::move(te);
    const NoiseModel model =
        build_transition_matrix(NoiseKind::symmetric, noise_ratio, classes);
    record = corrupt_labels(train.labels, model, 11);
  }
};

TrainConfig tiny_config(Strategy s, int epochs) {
  TrainConfig cfg;
  cfg.strategy = s;
  cfg.epochs_total = epochs;
  cfg.epochs_warmup = std::min(2, epochs);
  cfg.epochs_finetune = epochs >= 6 ? 2 : 0;
  cfg.batch_size = 32;
  cfg.lr_schedule = {{0, 1e-3}};
  cfg.forget_rate = 0.2;
  cfg.forget_horizon = 5;
  cfg.hidden_dim = 16;
  cfg.lambda_step = 100.0;
  cfg.k_init = 10.0;
  return cfg;
}

std::vector<double> params_of(const MlpModel& m) {
  return std::vector<double>(m.flat().begin(), m.flat().end());
}

}  // namespace

TEST_CASE("forget rate schedule ramps linearly and saturates") {
  CHECK(forget_rate_schedule(0, 0.2, 10) == doctest::Approx(1.0));
  CHECK(forget_rate_schedule(5, 0.2, 10) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(forget_rate_schedule(10, 0.2, 10) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(forget_rate_schedule(500, 0.2, 10) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(forget_rate_schedule(1, 1.0, 10), std::invalid_argument);
}

TEST_CASE("small-loss selection keeps the stated set") {
  const std::vector<double> losses = {0.1, 0.9, 0.3, 0.5};
  const SelectionOutcome out = select_small_loss(losses, 0.5);
  CHECK(out.kept_indices == std::vector<int>{0, 2});

  const SelectionOutcome all = select_small_loss(losses, 1.0);
  CHECK(all.kept_indices == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("small-loss selection matches a sort oracle and keeps ceil(k*B) >= 1") {
  rng::Engine gen(1);
  for (int rep = 0; rep < 50; ++rep) {
    const int b = 1 + static_cast<int>(rng::bounded(gen, 64));
    std::vector<double> losses(b);
    for (double& l : losses) l = rng::uniform01(gen);
    const double keep = 0.05 + 0.95 * rng::uniform01(gen);
    const SelectionOutcome out = select_small_loss(losses, keep);

    const int expected_count = std::max(1, static_cast<int>(std::ceil(keep * b)));
    CHECK(static_cast<int>(out.kept_indices.size()) == std::min(expected_count, b));

    std::vector<int> order(b);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      return losses[x] != losses[y] ? losses[x] < losses[y] : x < y;
    });
    std::vector<int> expected(order.begin(), order.begin() + out.kept_indices.size());
    std::sort(expected.begin(), expected.end());
    CHECK(out.kept_indices == expected);
  }
}

TEST_CASE("ties in selection break to the lower index") {
  const std::vector<double> losses = {0.5, 0.5, 0.5, 0.5};
  const SelectionOutcome out = select_small_loss(losses, 0.5);
  CHECK(out.kept_indices == std::vector<int>{0, 1});
}

TEST_CASE("lr schedule breakpoints apply from their epoch") {
  const std::vector<std::pair<int, double>> sched = {{0, 1e-3}, {140, 1e-4}};
  CHECK(lr_at(sched, 0) == 1e-3);
  CHECK(lr_at(sched, 139) == 1e-3);
  CHECK(lr_at(sched, 140) == 1e-4);
  CHECK(lr_at(sched, 319) == 1e-4);
}

TEST_CASE("stage table follows warmup/correction/finetune boundaries") {
  TrainConfig cfg = tiny_config(Strategy::mlc, 320);
  cfg.epochs_warmup = 30;
  cfg.epochs_finetune = 180;
  CHECK(stage_of(cfg, 0) == MlcStage::warmup);
  CHECK(stage_of(cfg, 29) == MlcStage::warmup);
  CHECK(stage_of(cfg, 30) == MlcStage::correction);
  CHECK(stage_of(cfg, 139) == MlcStage::correction);
  CHECK(stage_of(cfg, 140) == MlcStage::finetune);
  CHECK(stage_of(cfg, 319) == MlcStage::finetune);
}

TEST_CASE("config validation rejects inconsistent stages") {
  TrainConfig cfg = tiny_config(Strategy::mlc, 10);
  cfg.epochs_warmup = 8;
  cfg.epochs_finetune = 8;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("standard step with zero learning rate leaves parameters unchanged") {
  Workload w;
  MlpModel net({2, 16, 3}, 1);
  AdamState opt(net.param_count(), 0.0);
  const auto before = params_of(net);
  Matrix batch(4, 2);
  for (int i = 0; i < 4; ++i) {
    batch(i, 0) = w.train.features(i, 0);
    batch(i, 1) = w.train.features(i, 1);
  }
  const std::vector<int> labels(w.record.noisy_labels.begin(), w.record.noisy_labels.begin() + 4);
  standard_step(net, opt, batch, labels);
  CHECK(params_of(net) == before);
}

TEST_CASE("standard training reaches 99% train accuracy on clean blobs") {
  Dataset all = make_blobs(60, 3, 2, 0.1, 3);
  auto [train, test] = split(all, 0.8, 5);
  CorruptionRecord clean;
  clean.clean_labels = train.labels;
  clean.noisy_labels = train.labels;
  clean.corrupted_mask.assign(train.labels.size(), false);

  TrainConfig cfg = tiny_config(Strategy::standard, 200);
  cfg.epochs_warmup = 0;
  cfg.epochs_finetune = 0;
  const RunResult rr = run(cfg, train, clean, test);
  const std::vector<int> pred = predict(*rr.net1, train.features, cfg.batch_size);
  CHECK(accuracy(pred, train.labels) >= 0.99);
}

TEST_CASE("runs are deterministic under fixed seeds") {
  Workload w;
  const TrainConfig cfg = tiny_config(Strategy::coteaching, 3);
  const RunResult a = run(cfg, w.train, w.record, w.test);
  const RunResult b = run(cfg, w.train, w.record, w.test);
  CHECK(params_of(*a.net1) == params_of(*b.net1));
  CHECK(params_of(*a.net2) == params_of(*b.net2));
  REQUIRE(a.metrics.epochs.size() == b.metrics.epochs.size());
  for (size_t i = 0; i < a.metrics.epochs.size(); ++i) {
    CHECK(a.metrics.epochs[i].test_acc1 == b.metrics.epochs[i].test_acc1);
    CHECK(a.metrics.epochs[i].divergence == b.metrics.epochs[i].divergence);
  }
}

TEST_CASE("identical seeds and keep_ratio 1 keep co-teaching twins in lockstep") {
  Workload w;
  TrainConfig cfg = tiny_config(Strategy::coteaching, 3);
  cfg.seed_net1 = 42;
  cfg.seed_net2 = 42;
  cfg.forget_rate = 0.0;  // keep_ratio stays 1
  const RunResult rr = run(cfg, w.train, w.record, w.test);
  CHECK(params_of(*rr.net1) == params_of(*rr.net2));
  for (const auto& r : rr.metrics.epochs) {
    CHECK(r.divergence == 0.0);
    CHECK(r.test_acc1 == r.test_acc2);
  }
}

TEST_CASE("mutual and independent co-teaching diverge once selection bites") {
  // Epoch 0 keeps the whole batch (ramp starts at 1), so run long enough
  // for the forget ramp to make the selections differ.
  Workload w(0.4);
  TrainConfig mutual_cfg = tiny_config(Strategy::coteaching, 3);
  mutual_cfg.forget_rate = 0.4;
  mutual_cfg.forget_horizon = 1;
  TrainConfig indep_cfg = mutual_cfg;
  indep_cfg.strategy = Strategy::coteaching_independent;
  const RunResult mutual = run(mutual_cfg, w.train, w.record, w.test);
  const RunResult indep = run(indep_cfg, w.train, w.record, w.test);
  CHECK(params_of(*mutual.net1) != params_of(*indep.net1));
}

TEST_CASE("cross-update trains each network on its peer's selection") {
  Workload w(0.4);
  MlpModel net1({2, 16, 3}, 1), net2({2, 16, 3}, 2);
  MlpModel net1_copy = net1, net2_copy = net2;
  AdamState o1(net1.param_count(), 1e-3), o2(net2.param_count(), 1e-3);
  AdamState o1c(net1.param_count(), 1e-3), o2c(net2.param_count(), 1e-3);

  Matrix batch(16, 2);
  std::vector<int> noisy(16);
  for (int i = 0; i < 16; ++i) {
    batch(i, 0) = w.train.features(i, 0);
    batch(i, 1) = w.train.features(i, 1);
    noisy[i] = w.record.noisy_labels[i];
  }

  const StepResult res = coteaching_step(net1, net2, o1, o2, batch, noisy, 0.5, true);
  REQUIRE(res.selected1.size() == 8);
  REQUIRE(res.selected2.size() == 8);

  // Replaying net1's update with ONLY the peer selection reproduces it.
  const ForwardRecord rec = forward(net1_copy, batch);
  Matrix sub(static_cast<int>(res.selected2.size()), 2);
  std::vector<int> sub_labels;
  for (size_t i = 0; i < res.selected2.size(); ++i) {
    sub(static_cast<int>(i), 0) = batch(res.selected2[i], 0);
    sub(static_cast<int>(i), 1) = batch(res.selected2[i], 1);
    sub_labels.push_back(noisy[res.selected2[i]]);
  }
  const ForwardRecord sub_rec = forward(net1_copy, sub);
  const CrossEntropyLoss ce = cross_entropy_loss(sub_rec.probs, sub_labels);
  const auto grad = backward(net1_copy, sub_rec, ce.dlogits);
  adam_step(net1_copy, o1c, grad);
  CHECK(params_of(net1_copy) == params_of(net1));
}

TEST_CASE("co-teaching+ skips the step when the networks agree everywhere") {
  MlpModel net1({2, 8, 3}, 5);
  MlpModel net2 = net1;  // identical => identical predictions
  AdamState o1(net1.param_count(), 1e-3), o2(net2.param_count(), 1e-3);
  rng::Engine gen(2);
  const Matrix batch = oracles::random_matrix(12, 2, gen);
  std::vector<int> noisy(12, 1);
  const auto before1 = params_of(net1);
  const StepResult res = coteaching_plus_step(net1, net2, o1, o2, batch, noisy, 0.8);
  CHECK(res.skipped);
  CHECK(params_of(net1) == before1);
  CHECK(o1.step == 0);
}

TEST_CASE("co-teaching+ trains on a single disagreement row when within keep ratio") {
  // Build a batch of 7 agreement rows plus exactly 1 disagreement row by
  // classifying a candidate cloud with both networks first.
  MlpModel net1({2, 8, 3}, 5);
  MlpModel net2({2, 8, 3}, 77);
  AdamState o1(net1.param_count(), 1e-3), o2(net2.param_count(), 1e-3);
  rng::Engine gen(3);
  const Matrix cloud = oracles::random_matrix(512, 2, gen, 2.0);
  const auto p1 = predict(net1, cloud, 512);
  const auto p2 = predict(net2, cloud, 512);
  std::vector<int> agree_rows, disagree_rows;
  for (int i = 0; i < 512; ++i) {
    (p1[i] == p2[i] ? agree_rows : disagree_rows).push_back(i);
  }
  REQUIRE(agree_rows.size() >= 7);
  REQUIRE(disagree_rows.size() >= 1);

  Matrix batch(8, 2);
  const int where = 3;
  for (int i = 0, take = 0; i < 8; ++i) {
    const int src = i == where ? disagree_rows[0] : agree_rows[take++];
    batch(i, 0) = cloud(src, 0);
    batch(i, 1) = cloud(src, 1);
  }
  std::vector<int> noisy(8, 0);
  const StepResult res = coteaching_plus_step(net1, net2, o1, o2, batch, noisy, 0.3);
  CHECK_FALSE(res.skipped);
  CHECK(res.selected1 == std::vector<int>{where});
  CHECK(res.selected2 == std::vector<int>{where});
  CHECK(o1.step == 1);
}

TEST_CASE("degenerate MLC equals co-teaching bitwise for several epochs") {
  Workload w(0.4, 60, 3);
  TrainConfig ct = tiny_config(Strategy::coteaching, 4);
  ct.forget_rate = 0.4;

  TrainConfig mlc = ct;
  mlc.strategy = Strategy::mlc;
  mlc.weights.xi = 0.0;      // no co-regularization
  mlc.lambda_step = 0.0;     // no label updates
  mlc.epochs_warmup = 4;     // the whole run stays in warmup
  mlc.epochs_finetune = 0;
  mlc.warmup_plain_ce = true;

  const RunResult a = run(ct, w.train, w.record, w.test);
  const RunResult b = run(mlc, w.train, w.record, w.test);
  CHECK(params_of(*a.net1) == params_of(*b.net1));
  CHECK(params_of(*a.net2) == params_of(*b.net2));
}

TEST_CASE("lambda = 0 leaves the label store at its initialization") {
  Workload w(0.4);
  TrainConfig cfg = tiny_config(Strategy::mlc, 6);
  cfg.lambda_step = 0.0;
  const RunResult rr = run(cfg, w.train, w.record, w.test);
  REQUIRE(rr.store);
  const LabelStore fresh(w.record.noisy_labels, w.train.num_classes, cfg.k_init, 0.0);
  for (int i = 0; i < fresh.size(); ++i) {
    for (int j = 0; j < fresh.num_classes(); ++j) {
      CHECK(rr.store->y_tilde()(i, j) == fresh.y_tilde()(i, j));
    }
  }
}

TEST_CASE("label store mutates only during the correction stage") {
  Workload w(0.4);
  TrainConfig cfg = tiny_config(Strategy::mlc, 6);
  cfg.epochs_warmup = 2;
  cfg.epochs_finetune = 2;  // correction = epochs [2, 4)
  cfg.lambda_step = 50.0;

  MlpModel net1({2, cfg.hidden_dim, 3}, cfg.seed_net1);
  MlpModel net2({2, cfg.hidden_dim, 3}, cfg.seed_net2);
  AdamState o1(net1.param_count(), 1e-3), o2(net2.param_count(), 1e-3);
  LabelStore store(w.record.noisy_labels, 3, cfg.k_init, cfg.lambda_step);
  rng::Engine shuffle(cfg.seed_shuffle);

  auto snapshot = [&]() {
    return std::vector<double>(store.y_tilde().flat().begin(), store.y_tilde().flat().end());
  };

  const auto init = snapshot();
  mlc_epoch(net1, net2, o1, o2, store, w.train.features, w.record, 0, cfg, shuffle);
  mlc_epoch(net1, net2, o1, o2, store, w.train.features, w.record, 1, cfg, shuffle);
  CHECK(snapshot() == init);  // warmup epochs leave y~ untouched

  mlc_epoch(net1, net2, o1, o2, store, w.train.features, w.record, 2, cfg, shuffle);
  const auto after_correction = snapshot();
  CHECK(after_correction != init);

  mlc_epoch(net1, net2, o1, o2, store, w.train.features, w.record, 4, cfg, shuffle);
  mlc_epoch(net1, net2, o1, o2, store, w.train.features, w.record, 5, cfg, shuffle);
  CHECK(snapshot() == after_correction);  // finetune epochs freeze y~
}

TEST_CASE("a pure co-regularization gradient step pushes two toy networks apart") {
  MlpModel a({2, 3, 2}, 1);
  MlpModel b({2, 3, 2}, 2);
  const double before = param_distance(a, b);
  const CoRegularization co = co_regularization(before, -1.0);

  // Plain gradient step on xi * l_d alone for both networks.
  const double xi = 1.0, lr = 0.01;
  std::vector<double> diff(a.flat().begin(), a.flat().end());
  for (int i = 0; i < a.param_count(); ++i) diff[i] -= b.flat()[i];
  const double scale = xi * co.ddist / before;
  for (int i = 0; i < a.param_count(); ++i) {
    a.flat()[i] -= lr * scale * diff[i];
    b.flat()[i] -= lr * -scale * diff[i];
  }
  CHECK(param_distance(a, b) > before);
}

TEST_CASE("keep ratio count is non-increasing until the ramp saturates") {
  Workload w(0.4);
  TrainConfig cfg = tiny_config(Strategy::coteaching, 1);
  cfg.forget_rate = 0.4;
  cfg.forget_horizon = 6;
  int prev = w.train.size() + 1;
  for (int epoch = 0; epoch < 10; ++epoch) {
    const double keep = forget_rate_schedule(epoch, cfg.forget_rate, cfg.forget_horizon);
    const int count = static_cast<int>(std::ceil(keep * cfg.batch_size));
    CHECK(count <= prev);
    prev = count;
  }
  CHECK(prev == static_cast<int>(std::ceil(0.6 * cfg.batch_size)));
}

TEST_CASE("epochs_total = 0 leaves only the epoch-0 evaluation") {
  Workload w;
  TrainConfig cfg = tiny_config(Strategy::standard, 0);
  cfg.epochs_warmup = 0;
  cfg.epochs_finetune = 0;
  const RunResult rr = run(cfg, w.train, w.record, w.test);
  REQUIRE(rr.metrics.epochs.size() == 1);
  CHECK(rr.metrics.epochs[0].epoch == 0);
}

TEST_CASE("mlc with xi > 0 reports the co-regularization term") {
  Workload w(0.2);
  TrainConfig cfg = tiny_config(Strategy::mlc, 2);
  cfg.weights.xi = 0.1;
  const RunResult rr = run(cfg, w.train, w.record, w.test);
  CHECK(rr.metrics.epochs.back().l_d > 0.0);
}
