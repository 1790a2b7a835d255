#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noisylab/harness.hpp"
#include "noisylab/kernels.hpp"

using namespace noisylab;

namespace {

ExperimentSpec load_spec(const std::string& config_path, const std::string& out_override) {
  ExperimentSpec spec = parse_config(config_path);
  spec.output_dir = resolve_output_dir(spec.output_dir, out_override);
  if (spec.output_dir.empty()) {
    throw std::runtime_error("no output directory: set output_dir in the config, pass --out, "
                             "or export NOISYLAB_OUT");
  }
  return spec;
}

void print_campaign(const CampaignReport& r) {
  std::printf("%-24s mean_best=%.4f mean_last=%.4f (trials=%zu failures=%d)\n",
              r.strategy.c_str(), r.mean_best, r.mean_last, r.trials.size(), r.failures);
  for (const auto& t : r.trials) {
    if (t.failed) {
      std::printf("  %-32s FAILED: %s\n", t.directory.c_str(), t.error.c_str());
    } else {
      std::printf("  %-32s best=%.4f last=%.4f\n", t.directory.c_str(), t.summary.best_acc,
                  t.summary.last10_mean_acc);
    }
  }
}

int cmd_run(const std::string& config, const std::string& out, int jobs) {
  const ExperimentSpec spec = load_spec(config, out);
  const CampaignReport report = run_experiment(spec, jobs);
  print_campaign(report);
  return report.failures > 0 ? 1 : 0;
}

int cmd_compare(const std::string& config, const std::string& out,
                const std::string& strategies_csv, int jobs) {
  const ExperimentSpec spec = load_spec(config, out);
  std::vector<Strategy> strategies;
  std::string item;
  std::istringstream ss(strategies_csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) strategies.push_back(strategy_from_string(item));
  }
  const auto reports = compare_strategies(spec, strategies, jobs);
  int failures = 0;
  for (const auto& r : reports) {
    print_campaign(r);
    failures += r.failures;
  }
  std::printf("comparison table: %s/comparison.csv\n", spec.output_dir.c_str());
  return failures > 0 ? 1 : 0;
}

int cmd_inspect(const std::string& metrics_path) {
  RunMetrics metrics = read_metrics_csv(metrics_path);
  if (metrics.epochs.empty()) {
    std::printf("%s: no epochs recorded\n", metrics_path.c_str());
    return 1;
  }
  const RunSummary s = metrics.summary();
  const EpochRecord& last = metrics.epochs.back();
  std::printf("epochs recorded : %zu (last epoch %d)\n", metrics.epochs.size(), last.epoch);
  std::printf("best accuracy   : %.4f (epoch %d)\n", s.best_acc, s.argbest_epoch);
  std::printf("last-10 mean    : %.4f\n", s.last10_mean_acc);
  std::printf("final test acc  : net1 %.4f  net2 %.4f\n", last.test_acc1, last.test_acc2);
  std::printf("final divergence: %.6f\n", last.divergence);
  long clamp = 0, skipped = 0;
  for (const auto& r : metrics.epochs) {
    clamp += r.clamp_events;
    skipped += r.skipped_steps;
  }
  std::printf("clamp events    : %ld\nskipped steps   : %ld\n", clamp, skipped);
  return 0;
}

int cmd_gen_blobs(int per_class, int classes, int dim, double spread, uint64_t seed,
                  const std::string& out_path) {
  const Dataset ds = make_blobs(per_class, classes, dim, spread, seed);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error(out_path + ": cannot open for writing");
  out << "index,label";
  for (int d = 0; d < dim; ++d) out << ",x" << d;
  out << '\n';
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    out << i << ',' << ds.labels[i];
    for (double v : ds.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  std::printf("wrote %d samples (%d classes, dim %d) to %s\n", ds.size(), classes, dim,
              out_path.c_str());
  return 0;
}

int cmd_noise_check(const std::string& config, const std::string& csv_out) {
  const ExperimentSpec spec = parse_config(config);
  const auto [train_ds, test_ds] = prepare_data(spec.dataset);
  const NoiseModel model =
      build_transition_matrix(spec.noise.kind, spec.noise.ratio, train_ds.num_classes);
  const CorruptionRecord record = corrupt_labels(train_ds.labels, model, spec.noise.seed);

  std::printf("noise kind      : %s\n", to_string(spec.noise.kind).c_str());
  std::printf("configured ratio: %.4f\n", spec.noise.ratio);
  std::printf("realized ratio  : %.4f over %d labels\n", record.corrupted_fraction(),
              record.size());

  // Observed-vs-expected chi-square over the confusion counts, conditioned
  // on the per-class clean totals. Cells with zero expectation are skipped.
  const int c = model.num_classes();
  std::vector<std::vector<long>> counts(c, std::vector<long>(c, 0));
  std::vector<long> row_totals(c, 0);
  for (int i = 0; i < record.size(); ++i) {
    counts[record.clean_labels[i]][record.noisy_labels[i]] += 1;
    row_totals[record.clean_labels[i]] += 1;
  }
  double chi2 = 0.0;
  int dof = 0;
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      const double expected = row_totals[i] * model.transition(i, j);
      if (expected <= 0.0) continue;
      const double diff = counts[i][j] - expected;
      chi2 += diff * diff / expected;
      ++dof;
    }
    if (row_totals[i] > 0) --dof;  // one constraint per multinomial row
  }
  std::printf("chi-square      : %.2f with %d degrees of freedom\n", chi2, dof);
  if (!csv_out.empty()) {
    write_corruption_csv(record, csv_out);
    std::printf("corruption CSV  : %s\n", csv_out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisylab: noise-tolerant dual-network training laboratory"};
  app.require_subcommand(1);

  std::string config, out_dir, strategies, metrics_path, csv_out, out_path = "blobs.csv";
  int jobs = 1;
  int per_class = 100, classes = 4, dim = 2;
  double spread = 0.1;
  uint64_t seed = 7;

  auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
  run_cmd->add_option("config", config, "JSON experiment config")->required();
  run_cmd->add_option("--out", out_dir, "output directory override");
  run_cmd->add_option("--jobs", jobs, "max concurrent trials")->check(CLI::PositiveNumber);

  auto* cmp_cmd = app.add_subcommand("compare", "run one campaign per strategy on shared noise");
  cmp_cmd->add_option("config", config, "JSON experiment config")->required();
  cmp_cmd->add_option("--strategies", strategies, "comma-separated strategy list")->required();
  cmp_cmd->add_option("--out", out_dir, "output directory override");
  cmp_cmd->add_option("--jobs", jobs, "max concurrent trials")->check(CLI::PositiveNumber);

  auto* ins_cmd = app.add_subcommand("inspect", "summarize a metrics.csv");
  ins_cmd->add_option("metrics", metrics_path, "metrics.csv path")->required();

  auto* gen_cmd = app.add_subcommand("gen-blobs", "write a synthetic blobs dataset as CSV");
  gen_cmd->add_option("--per-class", per_class, "samples per class");
  gen_cmd->add_option("--classes", classes, "number of classes");
  gen_cmd->add_option("--dim", dim, "feature dimension");
  gen_cmd->add_option("--spread", spread, "per-dimension standard deviation");
  gen_cmd->add_option("--seed", seed, "generator seed");
  gen_cmd->add_option("--out", out_path, "output CSV path");

  auto* chk_cmd = app.add_subcommand("noise-check", "dry-run noise statistics for a config");
  chk_cmd->add_option("config", config, "JSON experiment config")->required();
  chk_cmd->add_option("--csv", csv_out, "also write the corruption record CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config, out_dir, jobs);
    if (*cmp_cmd) return cmd_compare(config, out_dir, strategies, jobs);
    if (*ins_cmd) return cmd_inspect(metrics_path);
    if (*gen_cmd) return cmd_gen_blobs(per_class, classes, dim, spread, seed, out_path);
    if (*chk_cmd) return cmd_noise_check(config, csv_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
