#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hardrank/analysis.hpp"
#include "hardrank/data.hpp"
#include "hardrank/model.hpp"
#include "hardrank/sampling.hpp"
#include "hardrank/training.hpp"

namespace hardrank {

enum class DataSource : std::uint8_t { synthetic, file, presplit };

struct ExperimentConfig {
  DataSource source = DataSource::synthetic;
  std::filesystem::path path;  // raw interactions (file)
  std::filesystem::path train_path, val_path, test_path;  // presplit
  TextFormat format = TextFormat::tsv;
  int k_core = 10;
  SyntheticSpec synthetic;

  ModelKind model = ModelKind::mf;
  int dim = 32;
  int layers = 2;

  SamplerConfig sampler;
  LossConfig loss;
  TrainConfig train;

  bool analysis = false;
  int analysis_tn_per_user = 200;
  int analysis_grid = 512;

  std::uint64_t seed = 0;
  std::filesystem::path out = "run";
};

/// Flat `section.key = value` configuration. Every key has a default and is
/// listed by keys(); unknown keys are rejected.
class ConfigMap {
 public:
  ConfigMap();

  static const std::vector<std::pair<std::string, std::string>>& defaults();
  static bool is_key(const std::string& key);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  /// Reads `key = value` lines; `#` starts a comment.
  void merge_file(const std::filesystem::path& path);
  void merge_stream(std::istream& in, const std::string& origin = "<stream>");
  void write(std::ostream& out) const;

  /// Typed view. Throws ConfigError naming the offending key.
  ExperimentConfig resolve() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct LoadedData {
  InteractionDataset dataset;
  std::vector<Interaction> planted_false_negatives;  // synthetic only
};

LoadedData load_data(const ExperimentConfig& config);
ScoringModel make_model(const ExperimentConfig& config, const InteractionDataset& dataset, EmbeddingTable params);

struct RunSummary {
  int k = 50;
  int best_epoch = 0;
  double best_val_recall = 0.0;
  double test_recall = 0.0;
  double test_ndcg = 0.0;
  std::optional<double> kl;

  /// `test_recall@K=<v> test_ndcg@K=<v>`
  std::string line() const;
};

/// Trains, keeps the best-validation checkpoint, evaluates it on test and
/// writes config.txt, dataset.csv, ids.tsv, metrics.csv, checkpoint.bin,
/// summary.txt (plus scores.csv, density.csv, kl.txt when analysis is on)
/// into config.out.
RunSummary run_experiment(const ConfigMap& config, std::ostream* log = nullptr);

/// Files every run directory must contain.
std::vector<std::string> run_manifest(bool with_analysis);

/// False-negative analysis of a finished run directory.
FalseNegativeReport analyze_run(const std::filesystem::path& run_dir, std::optional<int> tn_per_user = {});

using Override = std::pair<std::string, std::string>;
using SweepCell = std::vector<Override>;

std::vector<SweepCell> cartesian_grid(const std::vector<std::pair<std::string, std::vector<std::string>>>& axes);
/// Named study designs: "b-sweep" (a = c = 1, b in {-3, 0, 0.9, 3}) and
/// "c-sweep" (a = 0.1, c shrinking while b keeps the gradient peak fixed).
std::vector<SweepCell> sweep_preset(const std::string& name);

struct SweepRow {
  std::size_t cell = 0;
  std::string overrides;
  std::string status;  // "ok" or "error: ..."
  double best_val_recall = 0.0;
  double test_recall = 0.0;
  double test_ndcg = 0.0;
};

/// Runs each cell into <out>/cell_<n>/ and records results.csv. Cells already
/// recorded as ok in an existing results.csv are not rerun.
std::vector<SweepRow> sweep(const ConfigMap& base, const std::vector<SweepCell>& cells, int workers = worker_count(),
                            std::ostream* log = nullptr);

std::string format_overrides(const SweepCell& cell);

}  // namespace hardrank
