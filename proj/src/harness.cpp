#include "noisylab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace noisylab {

namespace {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void config_error(const std::string& source, const std::string& path,
                               const std::string& message) {
  throw std::runtime_error(source + ": key '" + path + "': " + message);
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& source, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    std::string best;
    int best_dist = 4;
    for (const auto& k : known) {
      const int d = edit_distance(key, k);
      if (d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    std::string msg = "unknown key";
    if (!best.empty()) msg += "; did you mean '" + best + "'?";
    config_error(source, prefix + key, msg);
  }
}

double get_number(const json& obj, const std::string& key, const std::string& source,
                  const std::string& prefix) {
  if (!obj.at(key).is_number()) config_error(source, prefix + key, "expected a number");
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const std::string& key, const std::string& source,
            const std::string& prefix) {
  if (!obj.at(key).is_number_integer()) config_error(source, prefix + key, "expected an integer");
  return obj.at(key).get<int>();
}

uint64_t get_seed(const json& obj, const std::string& key, const std::string& source,
                  const std::string& prefix) {
  if (!obj.at(key).is_number_integer()) config_error(source, prefix + key, "expected an integer");
  return obj.at(key).get<uint64_t>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& source,
                       const std::string& prefix) {
  if (!obj.at(key).is_string()) config_error(source, prefix + key, "expected a string");
  return obj.at(key).get<std::string>();
}

void apply_dataset(const json& obj, DatasetSpec& out, const std::string& source) {
  const std::string prefix = "dataset.";
  reject_unknown_keys(obj,
                      {"kind", "images", "labels", "test_images", "test_labels", "split_fraction",
                       "split_seed", "per_class", "classes", "dim", "spread", "seed",
                       "train_fraction"},
                      source, prefix);
  if (obj.contains("kind")) {
    const std::string kind = get_string(obj, "kind", source, prefix);
    if (kind == "mnist") {
      out.kind = DatasetSpec::Kind::mnist;
    } else if (kind == "blobs") {
      out.kind = DatasetSpec::Kind::blobs;
    } else {
      config_error(source, prefix + "kind", "expected 'mnist' or 'blobs', got '" + kind + "'");
    }
  }
  if (obj.contains("images")) out.mnist.images = get_string(obj, "images", source, prefix);
  if (obj.contains("labels")) out.mnist.labels = get_string(obj, "labels", source, prefix);
  if (obj.contains("test_images")) {
    out.mnist.test_images = get_string(obj, "test_images", source, prefix);
  }
  if (obj.contains("test_labels")) {
    out.mnist.test_labels = get_string(obj, "test_labels", source, prefix);
  }
  if (obj.contains("split_fraction")) {
    out.mnist.split_fraction = get_number(obj, "split_fraction", source, prefix);
  }
  if (obj.contains("split_seed")) {
    out.mnist.split_seed = get_seed(obj, "split_seed", source, prefix);
    out.blobs.split_seed = out.mnist.split_seed;
  }
  if (obj.contains("per_class")) out.blobs.per_class = get_int(obj, "per_class", source, prefix);
  if (obj.contains("classes")) out.blobs.classes = get_int(obj, "classes", source, prefix);
  if (obj.contains("dim")) out.blobs.dim = get_int(obj, "dim", source, prefix);
  if (obj.contains("spread")) out.blobs.spread = get_number(obj, "spread", source, prefix);
  if (obj.contains("seed")) out.blobs.seed = get_seed(obj, "seed", source, prefix);
  if (obj.contains("train_fraction")) {
    out.blobs.train_fraction = get_number(obj, "train_fraction", source, prefix);
  }
}

void apply_noise(const json& obj, NoiseSpec& out, const std::string& source) {
  const std::string prefix = "noise.";
  reject_unknown_keys(obj, {"kind", "ratio", "seed"}, source, prefix);
  if (obj.contains("kind")) {
    out.kind = noise_kind_from_string(get_string(obj, "kind", source, prefix));
  }
  if (obj.contains("ratio")) out.ratio = get_number(obj, "ratio", source, prefix);
  if (obj.contains("seed")) out.seed = get_seed(obj, "seed", source, prefix);
}

void apply_train(const json& obj, TrainConfig& out, bool& forget_rate_set,
                 const std::string& source) {
  const std::string prefix = "train.";
  reject_unknown_keys(obj,
                      {"strategy", "epochs_total", "epochs_warmup", "epochs_finetune",
                       "batch_size", "learning_rate", "lr_schedule", "forget_rate",
                       "forget_horizon", "alpha", "beta", "xi", "mu", "lambda_step", "K",
                       "hidden_dim", "warmup_plain_ce"},
                      source, prefix);
  if (obj.contains("strategy")) {
    out.strategy = strategy_from_string(get_string(obj, "strategy", source, prefix));
  }
  if (obj.contains("epochs_total")) out.epochs_total = get_int(obj, "epochs_total", source, prefix);
  if (obj.contains("epochs_warmup")) {
    out.epochs_warmup = get_int(obj, "epochs_warmup", source, prefix);
  }
  if (obj.contains("epochs_finetune")) {
    out.epochs_finetune = get_int(obj, "epochs_finetune", source, prefix);
  }
  if (obj.contains("batch_size")) out.batch_size = get_int(obj, "batch_size", source, prefix);
  if (obj.contains("learning_rate") && obj.contains("lr_schedule")) {
    config_error(source, prefix + "learning_rate", "give either learning_rate or lr_schedule");
  }
  if (obj.contains("learning_rate")) {
    out.lr_schedule = {{0, get_number(obj, "learning_rate", source, prefix)}};
  }
  if (obj.contains("lr_schedule")) {
    const auto& sched = obj.at("lr_schedule");
    if (!sched.is_array() || sched.empty()) {
      config_error(source, prefix + "lr_schedule", "expected a non-empty array of [epoch, rate]");
    }
    out.lr_schedule.clear();
    for (const auto& item : sched) {
      if (!item.is_array() || item.size() != 2 || !item[0].is_number_integer() ||
          !item[1].is_number()) {
        config_error(source, prefix + "lr_schedule", "each entry must be [epoch, rate]");
      }
      out.lr_schedule.emplace_back(item[0].get<int>(), item[1].get<double>());
    }
  }
  if (obj.contains("forget_rate")) {
    out.forget_rate = get_number(obj, "forget_rate", source, prefix);
    forget_rate_set = true;
  }
  if (obj.contains("forget_horizon")) {
    out.forget_horizon = get_int(obj, "forget_horizon", source, prefix);
  }
  if (obj.contains("alpha")) out.weights.alpha = get_number(obj, "alpha", source, prefix);
  if (obj.contains("beta")) out.weights.beta = get_number(obj, "beta", source, prefix);
  if (obj.contains("xi")) out.weights.xi = get_number(obj, "xi", source, prefix);
  if (obj.contains("mu")) out.weights.mu = get_number(obj, "mu", source, prefix);
  if (obj.contains("lambda_step")) out.lambda_step = get_number(obj, "lambda_step", source, prefix);
  if (obj.contains("K")) out.k_init = get_number(obj, "K", source, prefix);
  if (obj.contains("hidden_dim")) out.hidden_dim = get_int(obj, "hidden_dim", source, prefix);
  if (obj.contains("warmup_plain_ce")) {
    if (!obj.at("warmup_plain_ce").is_boolean()) {
      config_error(source, prefix + "warmup_plain_ce", "expected a boolean");
    }
    out.warmup_plain_ce = obj.at("warmup_plain_ce").get<bool>();
  }
}

void apply_trials(const json& arr, std::vector<TrialSeeds>& out, const std::string& source) {
  if (!arr.is_array() || arr.empty()) {
    config_error(source, "trials", "expected a non-empty array of [net1, net2, shuffle]");
  }
  out.clear();
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 3) {
      config_error(source, "trials", "each trial must be a [net1, net2, shuffle] seed triple");
    }
    out.push_back({item[0].get<uint64_t>(), item[1].get<uint64_t>(), item[2].get<uint64_t>()});
  }
}

const std::vector<std::pair<std::string, double>> kMnistLambdaGrid = {
    {"sn02", 1000.0}, {"sn04", 3000.0}, {"sn08", 3000.0}, {"pair02", 2000.0}, {"pair045", 2500.0}};

NoiseSpec mnist_noise_for(const std::string& grid) {
  NoiseSpec n;
  if (grid == "sn02") n = {NoiseKind::symmetric, 0.2, 1234};
  else if (grid == "sn04") n = {NoiseKind::symmetric, 0.4, 1234};
  else if (grid == "sn08") n = {NoiseKind::symmetric, 0.8, 1234};
  else if (grid == "pair02") n = {NoiseKind::pairflip, 0.2, 1234};
  else if (grid == "pair045") n = {NoiseKind::pairflip, 0.45, 1234};
  return n;
}

const std::vector<std::string> kStrategyNames = {"standard", "coteaching", "coteaching_independent",
                                                 "coteaching_plus", "mlc"};

std::vector<TrialSeeds> default_five_trials() {
  return {{11, 12, 13}, {21, 22, 23}, {31, 32, 33}, {41, 42, 43}, {51, 52, 53}};
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [grid, lambda] : kMnistLambdaGrid) {
    for (const auto& s : kStrategyNames) names.push_back("mnist_" + grid + "_" + s);
  }
  for (const auto& s : kStrategyNames) names.push_back("blobs_sn04_" + s);
  return names;
}

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec spec;
  for (const auto& [grid, lambda] : kMnistLambdaGrid) {
    for (const auto& s : kStrategyNames) {
      if (name != "mnist_" + grid + "_" + s) continue;
      spec.dataset.kind = DatasetSpec::Kind::mnist;
      spec.noise = mnist_noise_for(grid);
      spec.train = TrainConfig{};
      spec.train.strategy = strategy_from_string(s);
      spec.train.epochs_total = 320;
      spec.train.epochs_warmup = 30;
      spec.train.epochs_finetune = 180;
      spec.train.batch_size = 128;
      spec.train.lr_schedule = {{0, 1e-3}, {140, 1e-4}};
      spec.train.forget_rate = spec.noise.ratio;
      spec.train.forget_horizon = 10;
      spec.train.lambda_step = lambda;
      spec.train.k_init = 10.0;
      spec.train.hidden_dim = 256;
      spec.trials = default_five_trials();
      return spec;
    }
  }
  for (const auto& s : kStrategyNames) {
    if (name != "blobs_sn04_" + s) continue;
    spec.dataset.kind = DatasetSpec::Kind::blobs;
    // Wide-ish clusters plus 14 uninformative dimensions: separable, but
    // noisy-label memorization visibly costs the Standard baseline.
    spec.dataset.blobs = {500, 4, 16, 0.35, 7, 0.8, 1};
    spec.noise = {NoiseKind::symmetric, 0.4, 1234};
    spec.train = TrainConfig{};
    spec.train.strategy = strategy_from_string(s);
    spec.train.epochs_total = 120;
    spec.train.epochs_warmup = 12;
    spec.train.epochs_finetune = 66;
    spec.train.batch_size = 128;
    spec.train.lr_schedule = {{0, 1e-3}, {52, 1e-4}};
    spec.train.forget_rate = 0.4;
    spec.train.forget_horizon = 10;
    spec.train.lambda_step = 1000.0;
    spec.train.k_init = 10.0;
    spec.train.hidden_dim = 64;
    spec.trials = default_five_trials();
    return spec;
  }
  std::string msg = "unknown preset '" + name + "'; available:";
  for (const auto& n : preset_names()) msg += " " + n;
  throw std::runtime_error(msg);
}

void ExperimentSpec::validate() const {
  train.validate();
  require(noise.ratio >= 0.0 && noise.ratio < 1.0, "noise.ratio outside [0, 1)");
  require(!trials.empty(), "trials must be non-empty");
  for (size_t i = 0; i < trials.size(); ++i) {
    for (size_t j = i + 1; j < trials.size(); ++j) {
      if (trials[i].net1 == trials[j].net1 && trials[i].net2 == trials[j].net2 &&
          trials[i].shuffle == trials[j].shuffle) {
        throw std::invalid_argument("trials: duplicate seed triple at positions " +
                                    std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
  if (dataset.kind == DatasetSpec::Kind::mnist) {
    require(!dataset.mnist.images.empty() && !dataset.mnist.labels.empty(),
            "dataset: mnist requires images and labels paths");
    if (!dataset.mnist.split_fraction.has_value()) {
      require(!dataset.mnist.test_images.empty() && !dataset.mnist.test_labels.empty(),
              "dataset: mnist requires test files or a split_fraction");
    }
  } else {
    require(dataset.blobs.per_class > 0, "dataset.per_class must be positive");
    require(dataset.blobs.classes >= 2, "dataset.classes must be >= 2");
    require(dataset.blobs.dim >= 2, "dataset.dim must be >= 2");
    require(dataset.blobs.spread > 0.0, "dataset.spread must be positive");
    require(dataset.blobs.train_fraction > 0.0 && dataset.blobs.train_fraction < 1.0,
            "dataset.train_fraction outside (0,1)");
  }
}

ExperimentSpec parse_config_text(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    size_t line = 1;
    for (size_t i = 0; i < text.size() && i < e.byte; ++i) line += text[i] == '\n';
    throw std::runtime_error(source_name + ":" + std::to_string(line) + ": " + e.what());
  }
  if (!root.is_object()) throw std::runtime_error(source_name + ": top level must be an object");
  reject_unknown_keys(root, {"preset", "dataset", "noise", "train", "trials", "output_dir"},
                      source_name, "");

  ExperimentSpec spec;
  bool forget_rate_set = false;
  bool from_preset = false;
  if (root.contains("preset")) {
    spec = preset(get_string(root, "preset", source_name, ""));
    from_preset = true;
  }
  if (root.contains("dataset")) apply_dataset(root.at("dataset"), spec.dataset, source_name);
  if (root.contains("noise")) apply_noise(root.at("noise"), spec.noise, source_name);
  if (root.contains("train")) apply_train(root.at("train"), spec.train, forget_rate_set, source_name);
  if (root.contains("trials")) apply_trials(root.at("trials"), spec.trials, source_name);
  if (root.contains("output_dir")) spec.output_dir = get_string(root, "output_dir", source_name, "");

  // tau defaults to the injected noise ratio unless the config pinned it.
  if (!forget_rate_set && !from_preset) spec.train.forget_rate = spec.noise.ratio;

  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(source_name + ": " + e.what());
  }
  return spec;
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::pair<Dataset, Dataset> prepare_data(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::blobs) {
    const auto& b = spec.blobs;
    Dataset all = make_blobs(b.per_class, b.classes, b.dim, b.spread, b.seed);
    return split(all, b.train_fraction, b.split_seed);
  }
  const auto& m = spec.mnist;
  Dataset train = load_mnist_idx(m.images, m.labels);
  if (m.split_fraction.has_value()) {
    return split(train, *m.split_fraction, m.split_seed);
  }
  Dataset test = load_mnist_idx(m.test_images, m.test_labels);
  test.split_tag = SplitTag::test;
  return {std::move(train), std::move(test)};
}

namespace {

std::string trial_dir_name(const TrialSeeds& t) {
  return "trial-" + std::to_string(t.net1) + "-" + std::to_string(t.net2) + "-" +
         std::to_string(t.shuffle);
}

json summary_json(const ExperimentSpec& spec, const TrialSeeds& seeds, const RunResult& result) {
  const RunSummary s = result.metrics.summary();
  const EpochRecord& last = result.metrics.epochs.back();
  json j;
  j["strategy"] = to_string(spec.train.strategy);
  j["seeds"] = {{"net1", seeds.net1}, {"net2", seeds.net2}, {"shuffle", seeds.shuffle}};
  j["epochs_total"] = spec.train.epochs_total;
  j["best_acc"] = s.best_acc;
  j["last10_mean_acc"] = s.last10_mean_acc;
  j["argbest_epoch"] = s.argbest_epoch;
  j["final_test_acc1"] = last.test_acc1;
  j["final_test_acc2"] = last.test_acc2;
  j["final_divergence"] = last.divergence;
  long clamp = 0, skipped = 0;
  for (const auto& r : result.metrics.epochs) {
    clamp += r.clamp_events;
    skipped += r.skipped_steps;
  }
  j["clamp_events"] = clamp;
  j["skipped_steps"] = skipped;
  j["refused_label_rows"] = result.refused_label_rows;
  return j;
}

TrialReport execute_trial(const ExperimentSpec& spec, const TrialSeeds& seeds,
                          const Dataset& train_ds, const Dataset& test_ds,
                          const CorruptionRecord& record, const fs::path& dir) {
  TrialReport report;
  report.seeds = seeds;
  report.directory = dir.string();
  try {
    fs::create_directories(dir);
    TrainConfig cfg = spec.train;
    cfg.seed_net1 = seeds.net1;
    cfg.seed_net2 = seeds.net2;
    cfg.seed_shuffle = seeds.shuffle;

    MetricsWriter writer((dir / "metrics.csv").string());
    RunResult result = run(cfg, train_ds, record, test_ds, &writer);
    report.summary = result.metrics.summary();

    save_checkpoint(*result.net1, (dir / "net1.ckpt").string());
    if (result.net2) save_checkpoint(*result.net2, (dir / "net2.ckpt").string());

    json j = summary_json(spec, seeds, result);
    if (result.store) {
      const CorrectionTable table = export_corrected(*result.store, record);
      write_corrections_csv(table, (dir / "corrections.csv").string());
      j["recovery_rate"] = table.recovery_rate;
      j["preservation_rate"] = table.preservation_rate;
    }
    std::ofstream out(dir / "summary.json");
    out << j.dump(2) << '\n';
  } catch (const std::exception& e) {
    report.failed = true;
    report.error = e.what();
  }
  return report;
}

CampaignReport finalize_campaign(const ExperimentSpec& spec, std::vector<TrialReport> trials,
                                 const fs::path& strategy_dir) {
  CampaignReport report;
  report.strategy = to_string(spec.train.strategy);
  report.trials = std::move(trials);

  std::vector<RunMetrics> ok_runs;
  double best_sum = 0.0, last_sum = 0.0;
  for (const auto& t : report.trials) {
    if (t.failed) {
      report.failures += 1;
      continue;
    }
    ok_runs.push_back(read_metrics_csv((fs::path(t.directory) / "metrics.csv").string()));
    ok_runs.back().dual = is_dual(spec.train.strategy);
    best_sum += t.summary.best_acc;
    last_sum += t.summary.last10_mean_acc;
  }
  const size_t ok = report.trials.size() - report.failures;
  if (ok > 0) {
    report.last10_box = aggregate_trials(ok_runs);
    report.mean_best = best_sum / ok;
    report.mean_last = last_sum / ok;
  }

  json j;
  j["strategy"] = report.strategy;
  j["num_trials"] = report.trials.size();
  j["failures"] = report.failures;
  j["mean_best"] = report.mean_best;
  j["mean_last"] = report.mean_last;
  j["last10_box"] = {{"min", report.last10_box.min}, {"q1", report.last10_box.q1},
                     {"median", report.last10_box.median}, {"q3", report.last10_box.q3},
                     {"max", report.last10_box.max}, {"mean", report.last10_box.mean}};
  j["trials"] = json::array();
  for (const auto& t : report.trials) {
    json tj;
    tj["dir"] = t.directory;
    tj["seeds"] = {t.seeds.net1, t.seeds.net2, t.seeds.shuffle};
    if (t.failed) {
      tj["failed"] = true;
      tj["error"] = t.error;
    } else {
      tj["best_acc"] = t.summary.best_acc;
      tj["last10_mean_acc"] = t.summary.last10_mean_acc;
    }
    j["trials"].push_back(tj);
  }
  fs::create_directories(strategy_dir);
  std::ofstream out(strategy_dir / "aggregate.json");
  out << j.dump(2) << '\n';
  return report;
}

}  // namespace

CampaignReport run_experiment(const ExperimentSpec& spec, int jobs) {
  spec.validate();
  require(jobs >= 1, "run_experiment: jobs must be >= 1");
  require(!spec.output_dir.empty(), "run_experiment: output_dir not set");
  if (spec.dataset.kind == DatasetSpec::Kind::mnist) {
    for (const std::string& p :
         {spec.dataset.mnist.images, spec.dataset.mnist.labels, spec.dataset.mnist.test_images,
          spec.dataset.mnist.test_labels}) {
      if (!p.empty() && !fs::exists(p)) {
        throw std::runtime_error("dataset file does not exist: " + p);
      }
    }
  }

  const auto [train_ds, test_ds] = prepare_data(spec.dataset);
  const NoiseModel model =
      build_transition_matrix(spec.noise.kind, spec.noise.ratio, train_ds.num_classes);
  const CorruptionRecord record = corrupt_labels(train_ds.labels, model, spec.noise.seed);

  const fs::path strategy_dir = fs::path(spec.output_dir) / to_string(spec.train.strategy);
  std::vector<TrialReport> reports(spec.trials.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= spec.trials.size()) break;
      const fs::path dir = strategy_dir / trial_dir_name(spec.trials[i]);
      reports[i] = execute_trial(spec, spec.trials[i], train_ds, test_ds, record, dir);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int threads = std::min<int>(jobs, static_cast<int>(spec.trials.size()));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return finalize_campaign(spec, std::move(reports), strategy_dir);
}

std::vector<CampaignReport> compare_strategies(const ExperimentSpec& spec,
                                               const std::vector<Strategy>& strategies,
                                               int jobs) {
  require(!strategies.empty(), "compare_strategies: empty strategy list");
  std::vector<CampaignReport> reports;
  for (Strategy s : strategies) {
    ExperimentSpec variant = spec;
    variant.train.strategy = s;
    reports.push_back(run_experiment(variant, jobs));
  }

  const fs::path out = fs::path(spec.output_dir) / "comparison.csv";
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error(out.string() + ": cannot open for writing");
  csv << "strategy,mean_best,mean_last,last10_min,last10_q1,last10_median,last10_q3,last10_max,"
         "failures\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d",
                  r.strategy.c_str(), r.mean_best, r.mean_last, r.last10_box.min, r.last10_box.q1,
                  r.last10_box.median, r.last10_box.q3, r.last10_box.max, r.failures);
    csv << buf << '\n';
  }
  return reports;
}

RunMetrics read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != MetricsWriter::header()) {
    throw std::runtime_error(path + ": missing or unexpected metrics header");
  }
  RunMetrics metrics;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error(path + ": short metrics row '" + line + "'");
      }
      return field;
    };
    r.epoch = std::stoi(next());
    r.train_acc1 = std::stod(next());
    r.train_acc2 = std::stod(next());
    r.test_acc1 = std::stod(next());
    r.test_acc2 = std::stod(next());
    r.divergence = std::stod(next());
    r.l_c = std::stod(next());
    r.l_o = std::stod(next());
    r.l_e = std::stod(next());
    r.l_d = std::stod(next());
    r.clamp_events = std::stol(next());
    r.skipped_steps = std::stol(next());
    metrics.epochs.push_back(r);
  }
  return metrics;
}

std::string resolve_output_dir(const std::string& configured, const std::string& cli_override) {
  std::string dir = cli_override.empty() ? configured : cli_override;
  const char* root = std::getenv("NOISYLAB_OUT");
  if (root && *root && !dir.empty() && !fs::path(dir).is_absolute()) {
    return (fs::path(root) / dir).string();
  }
  return dir;
}

}  // namespace noisylab
