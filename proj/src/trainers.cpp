#include "noisylab/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "noisylab/kernels.hpp"

namespace noisylab {

Strategy strategy_from_string(const std::string& s) {
  if (s == "standard") return Strategy::standard;
  if (s == "coteaching") return Strategy::coteaching;
  if (s == "coteaching_independent") return Strategy::coteaching_independent;
  if (s == "coteaching_plus") return Strategy::coteaching_plus;
  if (s == "mlc") return Strategy::mlc;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::standard: return "standard";
    case Strategy::coteaching: return "coteaching";
    case Strategy::coteaching_independent: return "coteaching_independent";
    case Strategy::coteaching_plus: return "coteaching_plus";
    case Strategy::mlc: return "mlc";
  }
  throw std::logic_error("unreachable");
}

bool is_dual(Strategy s) { return s != Strategy::standard; }

void TrainConfig::validate() const {
  require(epochs_total >= 0 && epochs_warmup >= 0 && epochs_finetune >= 0,
          "TrainConfig: negative epoch count");
  require(epochs_warmup + epochs_finetune <= epochs_total,
          "TrainConfig: epochs_warmup + epochs_finetune must be <= epochs_total");
  require(batch_size > 0, "TrainConfig: batch_size must be positive");
  require(!lr_schedule.empty(), "TrainConfig: empty learning-rate schedule");
  require(lr_schedule.front().first == 0, "TrainConfig: lr schedule must start at epoch 0");
  for (size_t i = 0; i + 1 < lr_schedule.size(); ++i) {
    require(lr_schedule[i].first < lr_schedule[i + 1].first,
            "TrainConfig: lr schedule epochs must be strictly increasing");
  }
  for (const auto& [e, r] : lr_schedule) require(r >= 0.0, "TrainConfig: negative learning rate");
  require(forget_rate >= 0.0 && forget_rate < 1.0, "TrainConfig: forget_rate outside [0, 1)");
  require(forget_horizon >= 1, "TrainConfig: forget_horizon must be >= 1");
  weights.validate();
  require(lambda_step >= 0.0, "TrainConfig: lambda_step must be non-negative");
  require(k_init >= 0.0, "TrainConfig: K must be non-negative");
  require(hidden_dim > 0, "TrainConfig: hidden_dim must be positive");
}

MlcStage stage_of(const TrainConfig& cfg, int epoch) {
  if (epoch < cfg.epochs_warmup) return MlcStage::warmup;
  if (epoch >= cfg.epochs_total - cfg.epochs_finetune) return MlcStage::finetune;
  return MlcStage::correction;
}

double lr_at(const std::vector<std::pair<int, double>>& schedule, int epoch) {
  require(!schedule.empty(), "lr_at: empty schedule");
  double rate = schedule.front().second;
  for (const auto& [e, r] : schedule) {
    if (epoch >= e) rate = r;
  }
  return rate;
}

double forget_rate_schedule(int epoch, double tau, int t_k) {
  require(epoch >= 0, "forget_rate_schedule: negative epoch");
  require(tau >= 0.0 && tau < 1.0, "forget_rate_schedule: tau outside [0, 1)");
  require(t_k >= 1, "forget_rate_schedule: horizon must be >= 1");
  const double ramp = std::min(static_cast<double>(epoch) / t_k, 1.0);
  return 1.0 - ramp * tau;
}

SelectionOutcome select_small_loss(std::span<const double> per_sample_losses, double keep_ratio) {
  const int b = static_cast<int>(per_sample_losses.size());
  require(b >= 1, "select_small_loss: empty batch");
  require(keep_ratio > 0.0 && keep_ratio <= 1.0, "select_small_loss: keep_ratio outside (0, 1]");
  int kept = static_cast<int>(std::ceil(keep_ratio * b));
  kept = std::clamp(kept, 1, b);

  std::vector<int> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int c) {
    if (per_sample_losses[a] != per_sample_losses[c]) {
      return per_sample_losses[a] < per_sample_losses[c];
    }
    return a < c;
  });
  SelectionOutcome out;
  out.keep_ratio = keep_ratio;
  out.kept_indices.assign(order.begin(), order.begin() + kept);
  std::sort(out.kept_indices.begin(), out.kept_indices.end());
  return out;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.row(static_cast<int>(i)).data(), m.row(rows[i]).data(),
                sizeof(double) * m.cols());
  }
  return out;
}

ForwardRecord gather_record(const ForwardRecord& rec, std::span<const int> rows) {
  ForwardRecord out;
  out.input = gather_rows(rec.input, rows);
  out.hidden = gather_rows(rec.hidden, rows);
  out.logits = gather_rows(rec.logits, rows);
  out.probs = gather_rows(rec.probs, rows);
  return out;
}

std::vector<int> gather_ints(std::span<const int> values, std::span<const int> rows) {
  std::vector<int> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = values[rows[i]];
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    int best = 0;
    for (int j = 1; j < m.cols(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

LossBreakdown ce_breakdown(const CrossEntropyLoss& ce) {
  LossBreakdown b;
  b.l_c = ce.value;
  b.total = ce.value;
  b.per_sample_lc = ce.per_sample;
  return b;
}

// Cross-entropy gradient step restricted to `rows`, normalized by the
// selection size.
std::vector<double> ce_selection_gradient(const MlpModel& net, const ForwardRecord& rec,
                                          std::span<const int> noisy_labels,
                                          std::span<const int> rows) {
  const ForwardRecord sub = gather_record(rec, rows);
  const std::vector<int> sub_labels = gather_ints(noisy_labels, rows);
  const CrossEntropyLoss ce = cross_entropy_loss(sub.probs, sub_labels);
  return backward(net, sub, ce.dlogits);
}

}  // namespace

StepResult standard_step(MlpModel& model, AdamState& opt, const Matrix& batch,
                         std::span<const int> noisy_labels) {
  const ForwardRecord rec = forward(model, batch);
  const CrossEntropyLoss ce = cross_entropy_loss(rec.probs, noisy_labels);
  const std::vector<double> grad = backward(model, rec, ce.dlogits);
  adam_step(model, opt, grad);

  StepResult res;
  res.loss1 = ce_breakdown(ce);
  res.loss2 = res.loss1;
  res.pred1 = argmax_rows(rec.probs);
  res.pred2 = res.pred1;
  return res;
}

StepResult coteaching_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                           const Matrix& batch, std::span<const int> noisy_labels,
                           double keep_ratio, bool mutual) {
  require(net1.same_shape(net2), "coteaching_step: models must be structurally identical");
  const ForwardRecord rec1 = forward(net1, batch);
  const ForwardRecord rec2 = forward(net2, batch);
  const CrossEntropyLoss ce1 = cross_entropy_loss(rec1.probs, noisy_labels);
  const CrossEntropyLoss ce2 = cross_entropy_loss(rec2.probs, noisy_labels);

  StepResult res;
  res.selected1 = select_small_loss(ce1.per_sample, keep_ratio).kept_indices;
  res.selected2 = select_small_loss(ce2.per_sample, keep_ratio).kept_indices;
  const auto& rows1 = mutual ? res.selected2 : res.selected1;  // rows net1 trains on
  const auto& rows2 = mutual ? res.selected1 : res.selected2;

  const std::vector<double> grad1 = ce_selection_gradient(net1, rec1, noisy_labels, rows1);
  const std::vector<double> grad2 = ce_selection_gradient(net2, rec2, noisy_labels, rows2);
  adam_step(net1, opt1, grad1);
  adam_step(net2, opt2, grad2);

  res.loss1 = ce_breakdown(ce1);
  res.loss2 = ce_breakdown(ce2);
  res.pred1 = argmax_rows(rec1.probs);
  res.pred2 = argmax_rows(rec2.probs);
  return res;
}

StepResult coteaching_plus_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                                const Matrix& batch, std::span<const int> noisy_labels,
                                double keep_ratio) {
  require(net1.same_shape(net2), "coteaching_plus_step: models must be structurally identical");
  const ForwardRecord rec1 = forward(net1, batch);
  const ForwardRecord rec2 = forward(net2, batch);
  const CrossEntropyLoss ce1 = cross_entropy_loss(rec1.probs, noisy_labels);
  const CrossEntropyLoss ce2 = cross_entropy_loss(rec2.probs, noisy_labels);

  StepResult res;
  res.loss1 = ce_breakdown(ce1);
  res.loss2 = ce_breakdown(ce2);
  res.pred1 = argmax_rows(rec1.probs);
  res.pred2 = argmax_rows(rec2.probs);

  std::vector<int> disagree;
  for (int i = 0; i < batch.rows(); ++i) {
    if (res.pred1[i] != res.pred2[i]) disagree.push_back(i);
  }
  if (disagree.empty()) {
    res.skipped = true;
    return res;
  }

  auto restrict = [&](const std::vector<double>& losses) {
    std::vector<double> out(disagree.size());
    for (size_t i = 0; i < disagree.size(); ++i) out[i] = losses[disagree[i]];
    return out;
  };
  auto map_back = [&](std::vector<int> local) {
    for (int& v : local) v = disagree[v];
    return local;
  };
  res.selected1 = map_back(select_small_loss(restrict(ce1.per_sample), keep_ratio).kept_indices);
  res.selected2 = map_back(select_small_loss(restrict(ce2.per_sample), keep_ratio).kept_indices);

  const std::vector<double> grad1 = ce_selection_gradient(net1, rec1, noisy_labels, res.selected2);
  const std::vector<double> grad2 = ce_selection_gradient(net2, rec2, noisy_labels, res.selected1);
  adam_step(net1, opt1, grad1);
  adam_step(net2, opt2, grad2);
  return res;
}

StepResult mlc_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                    LabelStore& store, const Matrix& batch, std::span<const int> batch_indices,
                    double keep_ratio, MlcStage stage, const LossWeights& weights) {
  require(net1.same_shape(net2), "mlc_step: models must be structurally identical");
  require(static_cast<int>(batch_indices.size()) == batch.rows(), "mlc_step: index/batch mismatch");

  // Finetune drops the anchor and entropy terms; the compat and
  // co-regularization terms stay on.
  LossWeights stage_weights = weights;
  if (stage == MlcStage::finetune) {
    stage_weights.alpha = 0.0;
    stage_weights.beta = 0.0;
  }

  const ForwardRecord rec1 = forward(net1, batch);
  const ForwardRecord rec2 = forward(net2, batch);
  const Matrix label_dist = store.distribution(batch_indices);
  const std::vector<int> noisy = gather_ints(store.noisy_labels(), batch_indices);
  const Matrix noisy_oh = onehot(noisy, store.num_classes());

  const double dist = param_distance(net1, net2);
  CoRegularization coreg;
  if (stage_weights.xi > 0.0) coreg = co_regularization(dist, stage_weights.mu);

  StepResult res;
  res.loss1 = total_loss(rec1.probs, label_dist, noisy_oh, dist, stage_weights);
  res.loss2 = total_loss(rec2.probs, label_dist, noisy_oh, dist, stage_weights);
  res.pred1 = argmax_rows(rec1.probs);
  res.pred2 = argmax_rows(rec2.probs);
  res.dist_clamped = coreg.clamped;

  res.selected1 = select_small_loss(res.loss1.per_sample_lc, keep_ratio).kept_indices;
  res.selected2 = select_small_loss(res.loss2.per_sample_lc, keep_ratio).kept_indices;

  // Each network steps on the loss over its PEER's selection.
  auto selection_gradient = [&](const MlpModel& net, const ForwardRecord& rec,
                                std::span<const int> rows) {
    const ForwardRecord sub = gather_record(rec, rows);
    const Matrix sub_dist = gather_rows(label_dist, rows);
    Matrix dlogits = compat_loss_logit_grad(sub.probs, sub_dist);
    if (stage_weights.beta > 0.0) {
      const EntropyLoss ent = entropy_loss(sub.probs);
      const auto src = ent.dlogits.flat();
      auto dst = dlogits.flat();
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += stage_weights.beta * src[i];
    }
    return backward(net, sub, dlogits);
  };
  std::vector<double> grad1 = selection_gradient(net1, rec1, res.selected2);
  std::vector<double> grad2 = selection_gradient(net2, rec2, res.selected1);

  if (stage_weights.xi > 0.0) {
    // d l_d / d theta_1 = l_d'(dist) * (theta_1 - theta_2) / dist; mirrored
    // for theta_2. Both use the pre-step parameters.
    const double d_clamped = std::max(dist, kDistFloor);
    std::vector<double> diff(net1.flat().begin(), net1.flat().end());
    kernels::active().axpy(-1.0, net2.flat().data(), diff.data(), net2.param_count());
    const double scale = stage_weights.xi * coreg.ddist / d_clamped;
    kernels::active().axpy(scale, diff.data(), grad1.data(), net1.param_count());
    kernels::active().axpy(-scale, diff.data(), grad2.data(), net2.param_count());
  }

  adam_step(net1, opt1, grad1);
  adam_step(net2, opt2, grad2);

  if (stage == MlcStage::correction && store.lambda_step() > 0.0) {
    // Label update covers the whole batch, not just the selections.
    const Matrix lg1 = label_gradient(rec1.probs, label_dist, noisy_oh, stage_weights.alpha);
    const Matrix lg2 = label_gradient(rec2.probs, label_dist, noisy_oh, stage_weights.alpha);
    res.refused_label_rows = store.update(batch_indices, lg1, lg2);
  }
  return res;
}

namespace {

struct StatsAccumulator {
  EpochStats stats;
  long batches = 0;
  long correct1 = 0, correct2 = 0, total = 0;

  void add(const StepResult& res, std::span<const int> clean, bool dual, int epoch,
           long batch_index) {
    const double lc = dual ? 0.5 * (res.loss1.l_c + res.loss2.l_c) : res.loss1.l_c;
    const double lo = dual ? 0.5 * (res.loss1.l_o + res.loss2.l_o) : res.loss1.l_o;
    const double le = dual ? 0.5 * (res.loss1.l_e + res.loss2.l_e) : res.loss1.l_e;
    const double ld = dual ? 0.5 * (res.loss1.l_d + res.loss2.l_d) : res.loss1.l_d;
    const double tot = dual ? 0.5 * (res.loss1.total + res.loss2.total) : res.loss1.total;
    if (!std::isfinite(tot)) {
      throw std::runtime_error(
          "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
          std::to_string(batch_index) + ": l_c=" + std::to_string(lc) + " l_o=" +
          std::to_string(lo) + " l_e=" + std::to_string(le) + " l_d=" + std::to_string(ld));
    }
    stats.l_c += lc;
    stats.l_o += lo;
    stats.l_e += le;
    stats.l_d += ld;
    if (res.skipped) stats.skipped_steps += 1;
    if (res.dist_clamped) stats.clamp_events += 1;
    stats.refused_label_rows += res.refused_label_rows;
    batches += 1;

    for (size_t i = 0; i < clean.size(); ++i) {
      correct1 += res.pred1[i] == clean[i];
      correct2 += res.pred2[i] == clean[i];
    }
    total += static_cast<long>(clean.size());
  }

  EpochStats finish() {
    if (batches > 0) {
      stats.l_c /= batches;
      stats.l_o /= batches;
      stats.l_e /= batches;
      stats.l_d /= batches;
    }
    if (total > 0) {
      stats.train_acc1 = static_cast<double>(correct1) / total;
      stats.train_acc2 = static_cast<double>(correct2) / total;
    }
    return stats;
  }
};

}  // namespace

EpochStats mlc_epoch(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                     LabelStore& store, const Matrix& features, const CorruptionRecord& record,
                     int epoch, const TrainConfig& cfg, rng::Engine& shuffle_gen) {
  const int n = features.rows();
  const MlcStage stage = stage_of(cfg, epoch);
  const double keep = forget_rate_schedule(epoch, cfg.forget_rate, cfg.forget_horizon);
  const std::vector<int> order = rng::shuffled_indices(n, shuffle_gen);

  StatsAccumulator acc;
  for (int start = 0; start < n; start += cfg.batch_size) {
    const int b = std::min(cfg.batch_size, n - start);
    const std::span<const int> idx(order.data() + start, static_cast<size_t>(b));
    const Matrix batch = gather_rows(features, idx);
    const std::vector<int> clean = gather_ints(record.clean_labels, idx);

    StepResult res;
    if (stage == MlcStage::warmup && cfg.warmup_plain_ce) {
      const std::vector<int> noisy = gather_ints(record.noisy_labels, idx);
      res = coteaching_step(net1, net2, opt1, opt2, batch, noisy, keep, /*mutual=*/true);
    } else {
      res = mlc_step(net1, net2, opt1, opt2, store, batch, idx, keep, stage, cfg.weights);
    }
    acc.add(res, clean, /*dual=*/true, epoch, start / cfg.batch_size);
  }
  return acc.finish();
}

namespace {

EpochStats baseline_epoch(Strategy strategy, MlpModel& net1, MlpModel* net2, AdamState& opt1,
                          AdamState* opt2, const Matrix& features, const CorruptionRecord& record,
                          int epoch, const TrainConfig& cfg, rng::Engine& shuffle_gen) {
  const int n = features.rows();
  const double keep = forget_rate_schedule(epoch, cfg.forget_rate, cfg.forget_horizon);
  const std::vector<int> order = rng::shuffled_indices(n, shuffle_gen);
  const bool dual = is_dual(strategy);

  StatsAccumulator acc;
  for (int start = 0; start < n; start += cfg.batch_size) {
    const int b = std::min(cfg.batch_size, n - start);
    const std::span<const int> idx(order.data() + start, static_cast<size_t>(b));
    const Matrix batch = gather_rows(features, idx);
    const std::vector<int> noisy = gather_ints(record.noisy_labels, idx);
    const std::vector<int> clean = gather_ints(record.clean_labels, idx);

    StepResult res;
    switch (strategy) {
      case Strategy::standard:
        res = standard_step(net1, opt1, batch, noisy);
        break;
      case Strategy::coteaching:
        res = coteaching_step(net1, *net2, opt1, *opt2, batch, noisy, keep, /*mutual=*/true);
        break;
      case Strategy::coteaching_independent:
        res = coteaching_step(net1, *net2, opt1, *opt2, batch, noisy, keep, /*mutual=*/false);
        break;
      case Strategy::coteaching_plus:
        res = coteaching_plus_step(net1, *net2, opt1, *opt2, batch, noisy, keep);
        break;
      case Strategy::mlc:
        throw std::logic_error("baseline_epoch: mlc handled elsewhere");
    }
    acc.add(res, clean, dual, epoch, start / cfg.batch_size);
  }
  return acc.finish();
}

}  // namespace

RunResult run(const TrainConfig& cfg, const Dataset& train, const CorruptionRecord& record,
              const Dataset& test, MetricsWriter* writer) {
  cfg.validate();
  train.validate();
  test.validate();
  require(record.size() == train.size(), "run: corruption record does not match training set");
  require(train.num_classes == test.num_classes, "run: class count mismatch between splits");
  require(train.dim() == test.dim(), "run: feature dimension mismatch between splits");

  const bool dual = is_dual(cfg.strategy);
  const std::vector<int> dims = {train.dim(), cfg.hidden_dim, train.num_classes};

  RunResult rr;
  rr.metrics.dual = dual;
  rr.net1 = std::make_unique<MlpModel>(dims, cfg.seed_net1);
  AdamState opt1(rr.net1->param_count(), lr_at(cfg.lr_schedule, 0));
  std::unique_ptr<AdamState> opt2;
  if (dual) {
    rr.net2 = std::make_unique<MlpModel>(dims, cfg.seed_net2);
    opt2 = std::make_unique<AdamState>(rr.net2->param_count(), lr_at(cfg.lr_schedule, 0));
  }
  if (cfg.strategy == Strategy::mlc) {
    rr.store = std::make_unique<LabelStore>(record.noisy_labels, train.num_classes, cfg.k_init,
                                            cfg.lambda_step);
  }

  auto record_epoch = [&](int epoch_number, double train_acc1, double train_acc2,
                          const EpochStats* stats) {
    EpochRecord r;
    r.epoch = epoch_number;
    r.train_acc1 = train_acc1;
    r.train_acc2 = dual ? train_acc2 : train_acc1;
    const std::vector<int> pred1 = predict(*rr.net1, test.features, cfg.batch_size);
    r.test_acc1 = accuracy(pred1, test.labels);
    if (dual) {
      const std::vector<int> pred2 = predict(*rr.net2, test.features, cfg.batch_size);
      r.test_acc2 = accuracy(pred2, test.labels);
      r.divergence = epoch_divergence(*rr.net1, *rr.net2, test.features, cfg.batch_size);
    } else {
      r.test_acc2 = r.test_acc1;
    }
    if (stats) {
      r.l_c = stats->l_c;
      r.l_o = stats->l_o;
      r.l_e = stats->l_e;
      r.l_d = stats->l_d;
      r.clamp_events = stats->clamp_events;
      r.skipped_steps = stats->skipped_steps;
    }
    rr.metrics.epochs.push_back(r);
    if (writer) writer->append(r);
  };

  // Epoch 0 is the pre-training evaluation; train accuracy from a full pass.
  {
    const std::vector<int> p1 = predict(*rr.net1, train.features, cfg.batch_size);
    const double tr1 = accuracy(p1, record.clean_labels);
    double tr2 = tr1;
    if (dual) {
      const std::vector<int> p2 = predict(*rr.net2, train.features, cfg.batch_size);
      tr2 = accuracy(p2, record.clean_labels);
    }
    record_epoch(0, tr1, tr2, nullptr);
  }

  rng::Engine shuffle_gen(cfg.seed_shuffle);
  for (int epoch = 0; epoch < cfg.epochs_total; ++epoch) {
    const double lr = lr_at(cfg.lr_schedule, epoch);
    opt1.learning_rate = lr;
    if (opt2) opt2->learning_rate = lr;

    EpochStats stats;
    if (cfg.strategy == Strategy::mlc) {
      stats = mlc_epoch(*rr.net1, *rr.net2, opt1, *opt2, *rr.store, train.features, record, epoch,
                        cfg, shuffle_gen);
    } else {
      stats = baseline_epoch(cfg.strategy, *rr.net1, rr.net2.get(), opt1, opt2.get(),
                             train.features, record, epoch, cfg, shuffle_gen);
    }
    rr.refused_label_rows += stats.refused_label_rows;
    record_epoch(epoch + 1, stats.train_acc1, stats.train_acc2, &stats);
  }
  return rr;
}

}  // namespace noisylab
