#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noisylab/dataset.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/trainers.hpp"

namespace noisylab {

struct MnistSpec {
  std::string images, labels;
  std::string test_images, test_labels;
  // When set, the train files are re-split into train/test at this
  // fraction instead of using separate test files.
  std::optional<double> split_fraction;
  uint64_t split_seed = 1;
};

struct BlobsSpec {
  int per_class = 100;
  int classes = 4;
  int dim = 2;
  double spread = 0.1;
  uint64_t seed = 7;
  double train_fraction = 0.8;
  uint64_t split_seed = 1;
};

struct DatasetSpec {
  enum class Kind { mnist, blobs };
  Kind kind = Kind::blobs;
  MnistSpec mnist;
  BlobsSpec blobs;
};

struct NoiseSpec {
  NoiseKind kind = NoiseKind::symmetric;
  double ratio = 0.2;
  uint64_t seed = 1234;
};

struct TrialSeeds {
  uint64_t net1 = 1, net2 = 2, shuffle = 3;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  NoiseSpec noise;
  TrainConfig train;
  std::vector<TrialSeeds> trials = {{1, 2, 3}};
  std::string output_dir;

  void validate() const;
};

// Named presets covering the MNIST noise grid (sn-0.2/0.4/0.8,
// pair-0.2/0.45 x strategy) and the blobs end-to-end workload; a config
// file selects one with `"preset": "<name>"` and may override any key.
std::vector<std::string> preset_names();
ExperimentSpec preset(const std::string& name);

// Parses and fully validates a JSON config. Unknown keys are rejected
// with a nearest-match suggestion; errors name the offending key path.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_text(const std::string& text, const std::string& source_name);

// Materializes the spec's dataset pair (train, test).
std::pair<Dataset, Dataset> prepare_data(const DatasetSpec& spec);

struct TrialReport {
  TrialSeeds seeds;
  std::string directory;
  bool failed = false;
  std::string error;
  RunSummary summary;
};

struct CampaignReport {
  std::string strategy;
  std::vector<TrialReport> trials;
  int failures = 0;
  BoxStats last10_box;       // pooled over successful trials
  double mean_best = 0.0;
  double mean_last = 0.0;
};

// Runs every trial (optionally in parallel), writing per-trial
// metrics.csv / summary.json / checkpoints / corrections.csv under
// <output_dir>/<strategy>/trial-<n1>-<n2>-<n3>/, then aggregate.json.
// Trial failures are recorded and the remaining trials continue.
CampaignReport run_experiment(const ExperimentSpec& spec, int jobs = 1);

// One campaign per strategy on identical corrupted labels; emits
// <output_dir>/comparison.csv with one best/last row per strategy.
std::vector<CampaignReport> compare_strategies(const ExperimentSpec& spec,
                                               const std::vector<Strategy>& strategies,
                                               int jobs = 1);

// Re-reads a metrics CSV written by MetricsWriter.
RunMetrics read_metrics_csv(const std::string& path);

// Applies the NOISYLAB_OUT root to relative output directories.
std::string resolve_output_dir(const std::string& configured, const std::string& cli_override);

}  // namespace noisylab
