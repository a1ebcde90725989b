#include "hardrank/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

namespace hardrank {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = static_cast<T>(std::stod(text, &used));
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number, got '" + text + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

template <typename F>
auto with_key(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& ConfigMap::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"data.source", "synthetic"},
      {"data.path", ""},
      {"data.train_path", ""},
      {"data.val_path", ""},
      {"data.test_path", ""},
      {"data.format", "tsv"},
      {"data.k_core", "10"},
      {"synthetic.users", "2000"},
      {"synthetic.items", "4000"},
      {"synthetic.latent_dim", "16"},
      {"synthetic.per_user", "30"},
      {"synthetic.fn_fraction", "0.2"},
      {"synthetic.val_fraction", "0.1"},
      {"synthetic.test_fraction", "0.1"},
      {"synthetic.noise", "0.1"},
      {"model.kind", "mf"},
      {"model.dim", "32"},
      {"model.layers", "2"},
      {"sampler.kind", "dns"},
      {"sampler.pool_size", "32"},
      {"sampler.rejection_cap", "100"},
      {"loss.kind", "bpr"},
      {"loss.a", "1"},
      {"loss.b", "0"},
      {"loss.c", "1"},
      {"loss.l2", "0"},
      {"train.lr", "0.01"},
      {"train.epochs", "60"},
      {"train.batch_size", "2048"},
      {"train.eval_every", "1"},
      {"train.patience", "10"},
      {"train.k", "50"},
      {"train.exclude_val_from_test", "true"},
      {"analysis.enabled", "false"},
      {"analysis.tn_per_user", "200"},
      {"analysis.grid", "512"},
      {"run.seed", "0"},
      {"run.out", "run"},
  };
  return table;
}

bool ConfigMap::is_key(const std::string& key) {
  const auto& d = defaults();
  return std::any_of(d.begin(), d.end(), [&](const auto& kv) { return kv.first == key; });
}

ConfigMap::ConfigMap() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!is_key(key)) throw ConfigError(key, "unknown configuration key");
  values_[key] = value;
}

const std::string& ConfigMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown configuration key");
  return it->second;
}

void ConfigMap::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  merge_stream(in, path.string());
}

void ConfigMap::merge_stream(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, origin + ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void ConfigMap::write(std::ostream& out) const {
  for (const auto& [k, _] : defaults()) out << k << " = " << values_.at(k) << '\n';
}

ExperimentConfig ConfigMap::resolve() const {
  ExperimentConfig c;
  auto str = [&](const char* k) { return get(k); };
  auto i32 = [&](const char* k) { return parse_number<int>(k, get(k)); };
  auto u64 = [&](const char* k) { return parse_number<std::uint64_t>(k, get(k)); };
  auto dbl = [&](const char* k) { return parse_number<double>(k, get(k)); };
  auto positive = [&](const char* k) {
    int v = i32(k);
    if (v < 1) throw ConfigError(k, "must be positive");
    return v;
  };

  const auto source = str("data.source");
  if (source == "synthetic") c.source = DataSource::synthetic;
  else if (source == "file") c.source = DataSource::file;
  else if (source == "presplit") c.source = DataSource::presplit;
  else throw ConfigError("data.source", "expected synthetic, file or presplit, got '" + source + "'");
  c.path = str("data.path");
  c.train_path = str("data.train_path");
  c.val_path = str("data.val_path");
  c.test_path = str("data.test_path");
  if (c.source == DataSource::file && c.path.empty()) throw ConfigError("data.path", "required for file data");
  if (c.source == DataSource::presplit) {
    for (const char* k : {"data.train_path", "data.val_path", "data.test_path"})
      if (get(k).empty()) throw ConfigError(k, "required for presplit data");
  }
  c.format = with_key("data.format", [&] { return parse_text_format(str("data.format")); });
  c.k_core = positive("data.k_core");

  c.seed = u64("run.seed");
  c.out = str("run.out");

  auto& s = c.synthetic;
  s.n_users = positive("synthetic.users");
  s.n_items = positive("synthetic.items");
  s.latent_dim = positive("synthetic.latent_dim");
  s.interactions_per_user = positive("synthetic.per_user");
  s.false_negative_fraction = dbl("synthetic.fn_fraction");
  s.val_fraction = dbl("synthetic.val_fraction");
  s.test_fraction = dbl("synthetic.test_fraction");
  s.noise_level = dbl("synthetic.noise");
  s.seed = derive_seed(c.seed, "data");
  if (c.source == DataSource::synthetic) with_key("synthetic.fn_fraction", [&] { validate(s); return 0; });

  c.model = with_key("model.kind", [&] { return parse_model_kind(str("model.kind")); });
  c.dim = positive("model.dim");
  c.layers = i32("model.layers");
  if (c.layers < 0) throw ConfigError("model.layers", "must be nonnegative");

  c.sampler.kind = with_key("sampler.kind", [&] { return parse_sampler_kind(str("sampler.kind")); });
  c.sampler.pool_size = positive("sampler.pool_size");
  c.sampler.rejection_cap = i32("sampler.rejection_cap");
  if (c.sampler.rejection_cap < 0) throw ConfigError("sampler.rejection_cap", "must be nonnegative");
  c.sampler.seed = derive_seed(c.seed, "sampler");

  c.loss.kind = with_key("loss.kind", [&] { return parse_loss_kind(str("loss.kind")); });
  const double a = dbl("loss.a"), b = dbl("loss.b"), cc = dbl("loss.c");
  if (!(a >= 0)) throw ConfigError("loss.a", "must be >= 0");
  if (!(cc > 0)) throw ConfigError("loss.c", "must be > 0");
  c.loss.curve = with_key("loss.b", [&] { return PreferenceCurve<double>(a, b, cc); });
  c.loss.l2 = dbl("loss.l2");
  if (!(c.loss.l2 >= 0)) throw ConfigError("loss.l2", "must be >= 0");

  auto& t = c.train;
  t.adam.learning_rate = dbl("train.lr");
  if (!(t.adam.learning_rate > 0)) throw ConfigError("train.lr", "must be > 0");
  t.epochs = i32("train.epochs");
  if (t.epochs < 0) throw ConfigError("train.epochs", "must be nonnegative");
  t.batch_size = positive("train.batch_size");
  t.eval_every = positive("train.eval_every");
  t.early_stop_patience = i32("train.patience");
  if (t.early_stop_patience < 0) throw ConfigError("train.patience", "must be nonnegative");
  t.top_k = positive("train.k");
  t.exclude_val_from_test = parse_bool("train.exclude_val_from_test", str("train.exclude_val_from_test"));
  t.seed = derive_seed(c.seed, "train");

  c.analysis = parse_bool("analysis.enabled", str("analysis.enabled"));
  c.analysis_tn_per_user = i32("analysis.tn_per_user");
  if (c.analysis_tn_per_user < 0) throw ConfigError("analysis.tn_per_user", "must be nonnegative");
  c.analysis_grid = i32("analysis.grid");
  if (c.analysis_grid < 2) throw ConfigError("analysis.grid", "must be at least 2");
  return c;
}

LoadedData load_data(const ExperimentConfig& c) {
  switch (c.source) {
    case DataSource::synthetic: {
      auto data = generate_synthetic(c.synthetic);
      return {std::move(data.dataset), std::move(data.planted_false_negatives)};
    }
    case DataSource::file: {
      auto rows = load_interactions(c.path, c.format);
      rows = k_core_filter(rows, static_cast<std::size_t>(c.k_core));
      return {temporal_split(rows), {}};
    }
    case DataSource::presplit: {
      auto tr = load_pairs(c.train_path, c.format);
      auto va = load_pairs(c.val_path, c.format);
      auto te = load_pairs(c.test_path, c.format);
      return {from_presplit(tr, va, te), {}};
    }
  }
  throw SpecError("unreachable data source");
}

ScoringModel make_model(const ExperimentConfig& c, const InteractionDataset& dataset, EmbeddingTable params) {
  if (c.model == ModelKind::mf) return ScoringModel::matrix_factorization(std::move(params));
  auto graph = std::make_shared<const GraphPropagation>(dataset, c.layers);
  return ScoringModel::light_gcn(std::move(params), std::move(graph));
}

std::string RunSummary::line() const {
  std::ostringstream s;
  s << std::setprecision(6) << std::fixed << "test_recall@" << k << '=' << test_recall << " test_ndcg@" << k << '='
    << test_ndcg;
  return s.str();
}

std::vector<std::string> run_manifest(bool with_analysis) {
  std::vector<std::string> files = {"config.txt", "dataset.csv", "ids.tsv", "metrics.csv", "checkpoint.bin",
                                    "summary.txt"};
  if (with_analysis) files.insert(files.end(), {"scores.csv", "density.csv", "kl.txt"});
  return files;
}

namespace {

std::ofstream create(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_false_negatives(const std::filesystem::path& path, const std::vector<Interaction>& rows) {
  auto out = create(path);
  for (const auto& r : rows) out << r.user << '\t' << r.item << '\n';
}

std::vector<Interaction> read_false_negatives(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<Interaction> rows;
  Interaction r;
  while (in >> r.user >> r.item) rows.push_back(r);
  return rows;
}

void write_analysis(const std::filesystem::path& dir, const FalseNegativeReport& report) {
  {
    auto out = create(dir / "scores.csv");
    write_samples_csv(out, report.samples);
  }
  {
    auto out = create(dir / "density.csv");
    write_density_csv(out, report.true_negative, report.false_negative);
  }
  auto out = create(dir / "kl.txt");
  out << std::setprecision(10) << "kl_divergence=" << report.kl << '\n';
}

}  // namespace

RunSummary run_experiment(const ConfigMap& config, std::ostream* log) {
  const ExperimentConfig c = config.resolve();
  std::filesystem::create_directories(c.out);
  {
    auto out = create(c.out / "config.txt");
    config.write(out);
  }
  LoadedData data = load_data(c);
  const auto& ds = data.dataset;
  {
    auto out = create(c.out / "dataset.csv");
    write_summary_csv(out, summarize(ds));
  }
  {
    auto out = create(c.out / "ids.tsv");
    write_id_map(out, ds.ids());
  }
  if (c.source == DataSource::synthetic) write_false_negatives(c.out / "planted_false_negatives.tsv", data.planted_false_negatives);

  ScoringModel model = make_model(c, ds, init_embeddings(ds.n_users(), ds.n_items(), c.dim, derive_seed(c.seed, "init")));
  TrainResult result = train(ds, model, c.sampler, c.loss, c.train, [&](const TrainResult& r) {
    if (log) {
      const auto& last = r.curve.back();
      *log << "epoch " << last.epoch << " loss " << r.epochs.back().mean_loss << ' ' << to_string(last.split)
           << "_recall@" << c.train.top_k << ' ' << last.recall << '\n';
    }
    return true;
  });
  {
    auto out = create(c.out / "metrics.csv");
    write_metrics_csv(out, result, c.train.top_k);
  }
  save_checkpoint(c.out / "checkpoint.bin",
                  {{ds.n_users(), ds.n_items(), c.dim, c.model, c.seed, c.layers}, result.best_parameters});

  ScoringModel best = make_model(c, ds, result.best_parameters);
  const auto test = evaluate(best, ds, Split::test, c.train.top_k,
                             exclusion_for(Split::test, c.train.exclude_val_from_test));
  RunSummary summary;
  summary.k = c.train.top_k;
  summary.best_epoch = result.best_epoch;
  summary.best_val_recall = std::max(result.best_val_recall, 0.0);
  summary.test_recall = test.recall;
  summary.test_ndcg = test.ndcg;

  if (c.analysis) {
    const std::vector<Interaction> fns = c.source == DataSource::synthetic ? data.planted_false_negatives : ds.test();
    auto report = analyze_false_negatives(best, ds, fns, {c.analysis_tn_per_user, derive_seed(c.seed, "analysis")},
                                          c.analysis_grid);
    write_analysis(c.out, report);
    summary.kl = report.kl;
  }
  auto out = create(c.out / "summary.txt");
  out << summary.line() << '\n';
  return summary;
}

FalseNegativeReport analyze_run(const std::filesystem::path& run_dir, std::optional<int> tn_per_user) {
  ConfigMap config;
  config.merge_file(run_dir / "config.txt");
  const ExperimentConfig c = config.resolve();
  LoadedData data = load_data(c);
  Checkpoint ckpt = load_checkpoint(run_dir / "checkpoint.bin");
  if (ckpt.header.n_users != data.dataset.n_users() || ckpt.header.n_items != data.dataset.n_items())
    throw SpecError("checkpoint does not match the run's dataset");
  ScoringModel model = make_model(c, data.dataset, std::move(ckpt.table));
  std::vector<Interaction> fns = data.dataset.test();
  if (c.source == DataSource::synthetic) {
    auto planted = read_false_negatives(run_dir / "planted_false_negatives.tsv");
    fns = planted.empty() ? data.planted_false_negatives : planted;
  }
  auto report = analyze_false_negatives(model, data.dataset, fns,
                                        {tn_per_user.value_or(c.analysis_tn_per_user), derive_seed(c.seed, "analysis")},
                                        c.analysis_grid);
  write_analysis(run_dir, report);
  return report;
}

std::vector<SweepCell> cartesian_grid(const std::vector<std::pair<std::string, std::vector<std::string>>>& axes) {
  std::vector<SweepCell> cells{{}};
  for (const auto& [key, values] : axes) {
    if (!ConfigMap::is_key(key)) throw ConfigError(key, "unknown configuration key");
    if (values.empty()) throw ConfigError(key, "sweep axis has no values");
    std::vector<SweepCell> next;
    for (const auto& cell : cells)
      for (const auto& v : values) {
        auto c = cell;
        c.emplace_back(key, v);
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }
  return cells;
}

std::vector<SweepCell> sweep_preset(const std::string& name) {
  std::vector<SweepCell> cells;
  if (name == "b-sweep") {
    for (const char* b : {"-3", "0", "0.9", "3"})
      cells.push_back({{"loss.kind", "hardbpr"}, {"loss.a", "1"}, {"loss.c", "1"}, {"loss.b", b}});
    return cells;
  }
  if (name == "c-sweep") {
    // a = 0.1; b = -c * x_peak + ln sqrt(a / (1 + a)) keeps the peak at x_peak = 0
    const double a = 0.1;
    const double shift = 0.5 * (std::log(a) - std::log1p(a));
    for (double c : {4.0, 2.0, 1.0, 0.4, 0.24}) {
      cells.push_back({{"loss.kind", "hardbpr"}, {"loss.a", format_double(a)}, {"loss.c", format_double(c)},
                       {"loss.b", format_double(shift)}});
    }
    return cells;
  }
  throw ConfigError("preset", "unknown sweep preset '" + name + "' (expected b-sweep or c-sweep)");
}

std::string format_overrides(const SweepCell& cell) {
  std::string s;
  for (const auto& [k, v] : cell) {
    if (!s.empty()) s += ';';
    s += k + '=' + v;
  }
  return s;
}

namespace {

std::map<std::string, SweepRow> read_results(const std::filesystem::path& path) {
  std::map<std::string, SweepRow> done;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return done;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) continue;
    SweepRow r;
    r.cell = std::stoul(f[0]);
    r.overrides = f[1];
    r.status = f[2];
    r.best_val_recall = std::stod(f[3]);
    r.test_recall = std::stod(f[4]);
    r.test_ndcg = std::stod(f[5]);
    if (r.status == "ok") done[r.overrides] = r;
  }
  return done;
}

void write_results(const std::filesystem::path& path, const std::vector<std::optional<SweepRow>>& rows) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << "cell,overrides,status,best_val_recall,test_recall,test_ndcg\n" << std::setprecision(10);
    for (const auto& r : rows)
      if (r)
        out << r->cell << ',' << r->overrides << ',' << r->status << ',' << r->best_val_recall << ','
            << r->test_recall << ',' << r->test_ndcg << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<SweepRow> sweep(const ConfigMap& base, const std::vector<SweepCell>& cells, int workers, std::ostream* log) {
  if (cells.empty()) throw ConfigError("grid", "sweep grid is empty");
  const auto root = std::filesystem::path(base.get("run.out"));
  std::filesystem::create_directories(root);
  const auto results_path = root / "results.csv";
  const auto done = read_results(results_path);

  std::vector<std::optional<SweepRow>> rows(cells.size());
  std::mutex mutex;
  parallel_for(
      cells.size(),
      [&](std::size_t n) {
        SweepRow row;
        row.cell = n;
        row.overrides = format_overrides(cells[n]);
        if (auto it = done.find(row.overrides); it != done.end()) {
          row = it->second;
          row.cell = n;
        } else {
          try {
            ConfigMap cfg = base;
            for (const auto& [k, v] : cells[n]) cfg.set(k, v);
            std::ostringstream dir;
            dir << "cell_" << std::setw(3) << std::setfill('0') << n;
            cfg.set("run.out", (root / dir.str()).string());
            const auto summary = run_experiment(cfg);
            const auto c = cfg.resolve();
            auto curve_out = std::ofstream(root / dir.str() / "curve.csv");
            write_curve_csv(curve_out, delta_curve_sweep(c.loss.curve, -10.0, 10.0, 2001));
            row.status = "ok";
            row.best_val_recall = summary.best_val_recall;
            row.test_recall = summary.test_recall;
            row.test_ndcg = summary.test_ndcg;
          } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ' ');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            row.status = "error: " + msg;
          }
        }
        std::lock_guard lock(mutex);
        rows[n] = row;
        write_results(results_path, rows);
        if (log) *log << "cell " << n << " [" << row.overrides << "] " << row.status << '\n';
      },
      workers);
  std::vector<SweepRow> out;
  for (auto& r : rows) out.push_back(*r);
  return out;
}

}  // namespace hardrank
