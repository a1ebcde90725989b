// hardrank: command-line experiment runner.
//
//   hardrank run      [--config FILE] [flags]     train, select on val, report test
//   hardrank sweep    [--config FILE] (--preset NAME | --grid key=v1,v2 ...) [flags]
//   hardrank analyze  --run-dir DIR               false-negative KDE / KL analysis
//   hardrank curve    --a A --b B --c C           tabulate delta_g, g, -ln g
//   hardrank datastats [--config FILE] [flags]    #User,#Item,#Train,#Val,#Test,Density

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hardrank/analysis.hpp"
#include "hardrank/experiment.hpp"

namespace {

using hardrank::ConfigMap;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;
  bool synthetic = false;
  std::string dataset;
};

// Every configuration key is a flag of the same name; the common ones also
// have short aliases.
void add_config_flags(CLI::App& app, ConfigFlags& flags) {
  app.add_option("--config", flags.config_file, "key = value configuration file");
  app.add_option("--set", flags.sets, "key=value override (repeatable)");
  for (const auto& [key, _] : ConfigMap::defaults())
    app.add_option_function<std::string>("--" + key, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
                                         "config key " + key);
  const std::vector<std::pair<std::string, std::string>> aliases = {
      {"--model", "model.kind"},   {"--dim", "model.dim"},       {"--sampler", "sampler.kind"},
      {"--pool-size", "sampler.pool_size"}, {"--loss", "loss.kind"}, {"--a", "loss.a"},
      {"--b", "loss.b"},           {"--c", "loss.c"},            {"--l2", "loss.l2"},
      {"--lr", "train.lr"},        {"--epochs", "train.epochs"}, {"--k", "train.k"},
      {"--seed", "run.seed"},      {"--out", "run.out"}};
  for (const auto& [flag, key] : aliases)
    app.add_option_function<std::string>(flag, [&flags, key = key](const std::string& v) { flags.overrides[key] = v; },
                                         "alias of --" + key);
  app.add_option("--dataset", flags.dataset, "interaction file (user item timestamp rows)");
  app.add_flag("--synthetic", flags.synthetic, "use the planted-preference generator");
}

ConfigMap build_config(const ConfigFlags& flags) {
  ConfigMap config;
  if (!flags.config_file.empty()) config.merge_file(flags.config_file);
  if (!flags.dataset.empty()) {
    config.set("data.source", "file");
    config.set("data.path", flags.dataset);
  }
  if (flags.synthetic) config.set("data.source", "synthetic");
  for (const auto& s : flags.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw hardrank::ConfigError(s, "--set expects key=value");
    config.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : flags.overrides) config.set(k, v);
  config.resolve();
  return config;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise ranking trainer with hard negative sampling"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "train one configuration");
  add_config_flags(*run, run_flags);
  bool verbose = false;
  run->add_flag("-v,--verbose", verbose, "print per-evaluation progress");

  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
  add_config_flags(*sweep, sweep_flags);
  std::string preset;
  std::vector<std::string> grid;
  sweep->add_option("--preset", preset, "b-sweep or c-sweep");
  sweep->add_option("--grid", grid, "axis key=v1,v2,... (repeatable; Cartesian product)");

  auto* analyze = app.add_subcommand("analyze", "false-negative score analysis of a run directory");
  std::string run_dir;
  std::optional<int> tn_per_user;
  analyze->add_option("--run-dir", run_dir, "directory written by `run`")->required();
  analyze->add_option("--tn-per-user", tn_per_user, "true negatives sampled per user (0 = all)");

  auto* curve = app.add_subcommand("curve", "tabulate the preference curve");
  double a = 1.0, b = -1.0, c = 0.8, x_min = -10.0, x_max = 10.0;
  int steps = 2001;
  curve->add_option("--a", a, "lower-asymptote lift (>= 0)");
  curve->add_option("--b", b, "shift");
  curve->add_option("--c", c, "slope (> 0)");
  curve->add_option("--x-min", x_min);
  curve->add_option("--x-max", x_max);
  curve->add_option("--steps", steps);

  ConfigFlags stats_flags;
  auto* stats = app.add_subcommand("datastats", "dataset summary");
  add_config_flags(*stats, stats_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = build_config(run_flags);
      const auto summary = hardrank::run_experiment(config, verbose ? &std::cerr : nullptr);
      std::cout << summary.line() << '\n';
    } else if (*sweep) {
      const auto config = build_config(sweep_flags);
      std::vector<hardrank::SweepCell> cells;
      if (!preset.empty()) cells = hardrank::sweep_preset(preset);
      if (!grid.empty()) {
        std::vector<std::pair<std::string, std::vector<std::string>>> axes;
        for (const auto& g : grid) {
          auto eq = g.find('=');
          if (eq == std::string::npos) throw hardrank::ConfigError(g, "--grid expects key=v1,v2,...");
          axes.emplace_back(g.substr(0, eq), split(g.substr(eq + 1), ','));
        }
        auto product = hardrank::cartesian_grid(axes);
        if (cells.empty()) {
          cells = std::move(product);
        } else {
          std::vector<hardrank::SweepCell> combined;
          for (const auto& p : cells)
            for (const auto& q : product) {
              auto cell = p;
              cell.insert(cell.end(), q.begin(), q.end());
              combined.push_back(std::move(cell));
            }
          cells = std::move(combined);
        }
      }
      const auto rows = hardrank::sweep(config, cells, hardrank::worker_count(), &std::cerr);
      std::cout << "cell,overrides,status,best_val_recall,test_recall,test_ndcg\n";
      for (const auto& r : rows)
        std::cout << r.cell << ',' << r.overrides << ',' << r.status << ',' << r.best_val_recall << ','
                  << r.test_recall << ',' << r.test_ndcg << '\n';
    } else if (*analyze) {
      const auto report = hardrank::analyze_run(run_dir, tn_per_user);
      std::cout << "kl_divergence=" << report.kl << '\n';
    } else if (*curve) {
      const hardrank::PreferenceCurve<double> pc(a, b, c);
      hardrank::write_curve_csv(std::cout, hardrank::delta_curve_sweep(pc, x_min, x_max, steps));
    } else if (*stats) {
      const auto config = build_config(stats_flags).resolve();
      const auto data = hardrank::load_data(config);
      hardrank::write_summary_csv(std::cout, hardrank::summarize(data.dataset));
    }
  } catch (const hardrank::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
