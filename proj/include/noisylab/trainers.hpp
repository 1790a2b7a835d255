#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/dataset.hpp"
#include "noisylab/labels.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

enum class Strategy { standard, coteaching, coteaching_independent, coteaching_plus, mlc };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);
bool is_dual(Strategy s);

struct TrainConfig {
  Strategy strategy = Strategy::mlc;

  // Stage layout: warmup [0, W), correction [W, total - F), finetune
  // [total - F, total). Label updates happen only in the correction stage.
  int epochs_total = 320;
  int epochs_warmup = 30;
  int epochs_finetune = 180;

  int batch_size = 128;
  // (epoch, rate) breakpoints; the rate of the last breakpoint <= epoch applies.
  std::vector<std::pair<int, double>> lr_schedule = {{0, 1e-3}, {140, 1e-4}};

  double forget_rate = 0.2;  // tau; defaults to the injected noise ratio
  int forget_horizon = 10;   // T_k, epochs to ramp keep_ratio down to 1-tau

  LossWeights weights;
  double lambda_step = 1000.0;  // label-update step size
  double k_init = 10.0;         // label logit initialization scale
  int hidden_dim = 256;
  // When set, warmup epochs run the plain cross-entropy Co-teaching step
  // instead of the composite loss with frozen labels.
  bool warmup_plain_ce = false;

  uint64_t seed_net1 = 1;
  uint64_t seed_net2 = 2;
  uint64_t seed_shuffle = 3;

  void validate() const;
};

enum class MlcStage { warmup, correction, finetune };
MlcStage stage_of(const TrainConfig& cfg, int epoch);

double lr_at(const std::vector<std::pair<int, double>>& schedule, int epoch);

// keep_ratio = 1 - min(epoch/T_k, 1) * tau.
double forget_rate_schedule(int epoch, double tau, int t_k);

struct SelectionOutcome {
  std::vector<int> kept_indices;  // ascending
  double keep_ratio = 1.0;
};

// The ceil(keep_ratio * B) smallest losses (at least one); ties break to
// the lower index.
SelectionOutcome select_small_loss(std::span<const double> per_sample_losses, double keep_ratio);

struct StepResult {
  LossBreakdown loss1, loss2;             // full-batch values, for metrics
  std::vector<int> selected1, selected2;  // each network's own selection
  std::vector<int> pred1, pred2;          // argmax predictions on the batch
  bool skipped = false;                   // co-teaching+ empty disagreement
  bool dist_clamped = false;              // co-regularization hit the floor
  int refused_label_rows = 0;
};

// One cross-entropy step on the noisy labels.
StepResult standard_step(MlpModel& model, AdamState& opt, const Matrix& batch,
                         std::span<const int> noisy_labels);

// Small-loss selection per network; mutual=true trains each network on its
// peer's selection, mutual=false on its own (the independent ablation).
StepResult coteaching_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                           const Matrix& batch, std::span<const int> noisy_labels,
                           double keep_ratio, bool mutual);

// Co-teaching restricted to the rows where the two networks' argmax
// predictions disagree; the whole step is skipped if none do.
StepResult coteaching_plus_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                                const Matrix& batch, std::span<const int> noisy_labels,
                                double keep_ratio);

// One composite-loss batch step: forward both networks, fetch y^d, select
// by per-sample compat loss, cross-update with the co-regularization
// gradient on each network's own parameters, and (correction stage only)
// update the label store with the summed label gradients of the full batch.
StepResult mlc_step(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                    LabelStore& store, const Matrix& batch, std::span<const int> batch_indices,
                    double keep_ratio, MlcStage stage, const LossWeights& weights);

struct EpochStats {
  double l_c = 0.0, l_o = 0.0, l_e = 0.0, l_d = 0.0;  // batch means
  long clamp_events = 0;
  long skipped_steps = 0;
  long refused_label_rows = 0;
  double train_acc1 = 0.0, train_acc2 = 0.0;  // online, over training batches
};

// One full MLC epoch over the shuffled training set.
EpochStats mlc_epoch(MlpModel& net1, MlpModel& net2, AdamState& opt1, AdamState& opt2,
                     LabelStore& store, const Matrix& features, const CorruptionRecord& record,
                     int epoch, const TrainConfig& cfg, rng::Engine& shuffle_gen);

struct RunResult {
  RunMetrics metrics;
  std::unique_ptr<MlpModel> net1;
  std::unique_ptr<MlpModel> net2;       // null for single-network strategies
  std::unique_ptr<LabelStore> store;    // only for mlc
  long refused_label_rows = 0;
};

// The staged training loop: per-epoch shuffle, strategy steps, test
// evaluation, divergence tracking, and best/last bookkeeping. The train
// accuracies are measured online against the record's clean labels; the
// epoch-0 row is a pre-training evaluation.
RunResult run(const TrainConfig& cfg, const Dataset& train, const CorruptionRecord& record,
              const Dataset& test, MetricsWriter* writer = nullptr);

}  // namespace noisylab
