#pragma once

#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/matrix.hpp"
#include "noisylab/nn.hpp"

namespace noisylab {

struct EpochRecord {
  int epoch = 0;
  double train_acc1 = 0.0, train_acc2 = 0.0;
  double test_acc1 = 0.0, test_acc2 = 0.0;
  double divergence = 0.0;
  double l_c = 0.0, l_o = 0.0, l_e = 0.0, l_d = 0.0;
  long clamp_events = 0;
  long skipped_steps = 0;
};

struct RunSummary {
  double best_acc = 0.0;
  double last10_mean_acc = 0.0;
  int argbest_epoch = 0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  bool dual = true;  // dual strategies report the mean of both networks

  // Mean of the two networks' test accuracies for dual strategies,
  // test_acc1 otherwise.
  double epoch_accuracy(const EpochRecord& r) const;
  // Epoch accuracies of the final 10 recorded epochs (all if fewer).
  std::vector<double> last10_accuracies() const;
  RunSummary summary() const;
};

double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Eq. 1 symmetric KL averaged over every sample of the evaluation set,
// computed in fixed batch order.
double epoch_divergence(const MlpModel& net1, const MlpModel& net2, const Matrix& features,
                        int batch_size);

struct DivergenceBin {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean_accuracy = 0.0;  // meaningful only when count > 0
};

// Equal-width bins over the observed divergence range; per-bin mean accuracy.
std::vector<DivergenceBin> divergence_accuracy_bins(
    std::span<const std::pair<double, double>> history, int num_bins);

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

// Quantile at position (n-1)*q of the sorted pool, linearly interpolated
// between neighbors (the common "type 7" rule).
BoxStats box_stats(std::vector<double> values);

// Pools the last-10-epoch accuracies across all runs.
BoxStats aggregate_trials(const std::vector<RunMetrics>& runs);

// Streams metrics rows as CSV; each row is flushed whole so a killed run
// leaves a valid prefix.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(const EpochRecord& r);

  static std::string header();
  static std::string format_row(const EpochRecord& r);

 private:
  std::ofstream out_;
};

}  // namespace noisylab
