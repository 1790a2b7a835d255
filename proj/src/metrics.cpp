#include "noisylab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "noisylab/losses.hpp"

namespace noisylab {

double RunMetrics::epoch_accuracy(const EpochRecord& r) const {
  return dual ? 0.5 * (r.test_acc1 + r.test_acc2) : r.test_acc1;
}

std::vector<double> RunMetrics::last10_accuracies() const {
  const size_t n = epochs.size();
  const size_t take = std::min<size_t>(10, n);
  std::vector<double> out;
  out.reserve(take);
  for (size_t i = n - take; i < n; ++i) out.push_back(epoch_accuracy(epochs[i]));
  return out;
}

RunSummary RunMetrics::summary() const {
  RunSummary s;
  if (epochs.empty()) return s;
  s.best_acc = -1.0;
  for (const auto& r : epochs) {
    const double acc = epoch_accuracy(r);
    if (acc > s.best_acc) {
      s.best_acc = acc;
      s.argbest_epoch = r.epoch;
    }
  }
  const auto last = last10_accuracies();
  double sum = 0.0;
  for (double v : last) sum += v;
  s.last10_mean_acc = sum / last.size();
  return s;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), "accuracy: length mismatch");
  require(!predictions.empty(), "accuracy: empty input");
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / predictions.size();
}

double epoch_divergence(const MlpModel& net1, const MlpModel& net2, const Matrix& features,
                        int batch_size) {
  require(batch_size > 0, "epoch_divergence: batch_size must be positive");
  const int n = features.rows();
  require(n > 0, "epoch_divergence: empty evaluation set");
  double total = 0.0;
  Matrix buf;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    buf = Matrix(b, features.cols());
    std::memcpy(buf.data(), features.data() + static_cast<size_t>(start) * features.cols(),
                sizeof(double) * buf.size());
    const ForwardRecord r1 = forward(net1, buf);
    const ForwardRecord r2 = forward(net2, buf);
    for (int i = 0; i < b; ++i) {
      total += kl_divergence(r1.probs.row(i), r2.probs.row(i)) +
               kl_divergence(r2.probs.row(i), r1.probs.row(i));
    }
  }
  return total / n;
}

std::vector<DivergenceBin> divergence_accuracy_bins(
    std::span<const std::pair<double, double>> history, int num_bins) {
  require(num_bins >= 2, "divergence_accuracy_bins: need at least 2 bins");
  require(!history.empty(), "divergence_accuracy_bins: empty history");

  double lo = history[0].first, hi = history[0].first;
  for (const auto& [d, a] : history) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double width = hi > lo ? (hi - lo) / num_bins : 1.0;

  std::vector<DivergenceBin> bins(num_bins);
  std::vector<double> sums(num_bins, 0.0);
  for (int k = 0; k < num_bins; ++k) {
    bins[k].lo = lo + k * width;
    bins[k].hi = lo + (k + 1) * width;
  }
  for (const auto& [d, a] : history) {
    int k = static_cast<int>((d - lo) / width);
    k = std::clamp(k, 0, num_bins - 1);
    bins[k].count += 1;
    sums[k] += a;
  }
  for (int k = 0; k < num_bins; ++k) {
    if (bins[k].count > 0) bins[k].mean_accuracy = sums[k] / bins[k].count;
  }
  return bins;
}

BoxStats box_stats(std::vector<double> values) {
  require(!values.empty(), "box_stats: empty pool");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  auto quantile = [&](double q) {
    const double pos = q * (n - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - lo;
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  BoxStats s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  return s;
}

BoxStats aggregate_trials(const std::vector<RunMetrics>& runs) {
  require(!runs.empty(), "aggregate_trials: no runs");
  std::vector<double> pool;
  for (const auto& run : runs) {
    const auto vals = run.last10_accuracies();
    pool.insert(pool.end(), vals.begin(), vals.end());
  }
  return box_stats(std::move(pool));
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error(path + ": cannot open for writing");
  out_ << header() << '\n';
  out_.flush();
}

void MetricsWriter::append(const EpochRecord& r) {
  out_ << format_row(r) << '\n';
  out_.flush();
}

std::string MetricsWriter::header() {
  return "epoch,train_acc1,train_acc2,test_acc1,test_acc2,divergence,"
         "l_c,l_o,l_e,l_d,clamp_events,skipped_steps";
}

std::string MetricsWriter::format_row(const EpochRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld", r.epoch,
                r.train_acc1, r.train_acc2, r.test_acc1, r.test_acc2, r.divergence, r.l_c, r.l_o,
                r.l_e, r.l_d, r.clamp_events, r.skipped_steps);
  return buf;
}

}  // namespace noisylab
