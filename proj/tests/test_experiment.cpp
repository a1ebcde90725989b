#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hardrank/experiment.hpp"

using namespace hardrank;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hardrank_test_experiment") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ConfigMap tiny(const fs::path& out) {
  ConfigMap c;
  c.set("synthetic.users", "60");
  c.set("synthetic.items", "150");
  c.set("synthetic.latent_dim", "4");
  c.set("synthetic.per_user", "20");
  c.set("model.dim", "8");
  c.set("sampler.pool_size", "4");
  c.set("train.epochs", "3");
  c.set("train.batch_size", "256");
  c.set("train.k", "10");
  c.set("run.seed", "7");
  c.set("run.out", out.string());
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// metrics.csv minus the wall-clock column
std::string metrics_without_time(const fs::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

std::string error_key(const ConfigMap& c) {
  try {
    c.resolve();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("config keys and errors") {
  ConfigMap c;
  CHECK(c.get("loss.kind") == "bpr");
  CHECK(ConfigMap::is_key("sampler.pool_size"));
  CHECK_FALSE(ConfigMap::is_key("sampler.pool"));
  CHECK_THROWS_AS(c.set("loss.alpha", "1"), ConfigError);
  try {
    c.set("loss.alpha", "1");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "loss.alpha");
  }

  ConfigMap bad = c;
  bad.set("train.lr", "fast");
  CHECK(error_key(bad) == "train.lr");
  bad = c;
  bad.set("sampler.kind", "gan");
  CHECK(error_key(bad) == "sampler.kind");
  bad = c;
  bad.set("train.epochs", "-1");
  CHECK(error_key(bad) == "train.epochs");
  bad = c;
  bad.set("model.dim", "2.5");
  CHECK(error_key(bad) == "model.dim");
  bad = c;
  bad.set("data.source", "file");
  CHECK(error_key(bad) == "data.path");
  CHECK(error_key(c).empty());

  std::istringstream in("# comment\nloss.kind = hardbpr\n  loss.b = -0.5  # trailing\n\n");
  c.merge_stream(in);
  const auto r = c.resolve();
  CHECK(r.loss.kind == LossKind::hard_bpr);
  CHECK(r.loss.curve.b() == -0.5);
  std::istringstream junk("loss.kind hardbpr\n");
  CHECK_THROWS_AS(c.merge_stream(junk), ParseError);

  std::ostringstream out;
  c.write(out);
  ConfigMap again;
  std::istringstream back(out.str());
  again.merge_stream(back);
  CHECK(again.values() == c.values());
}

TEST_CASE("run writes its manifest and is deterministic") {
  const auto root = scratch("run");
  auto cfg = tiny(root / "a");
  cfg.set("analysis.enabled", "true");
  cfg.set("analysis.tn_per_user", "20");
  const auto s1 = run_experiment(cfg);
  for (const auto& f : run_manifest(true)) CHECK_MESSAGE(fs::exists(root / "a" / f), f);
  CHECK(s1.k == 10);
  CHECK(s1.kl.has_value());
  CHECK(s1.line().find("test_recall@10=") == 0);
  CHECK(s1.test_recall >= 0.0);
  CHECK(s1.test_recall <= 1.0);

  cfg.set("run.out", (root / "b").string());
  const auto s2 = run_experiment(cfg);
  CHECK(s2.test_recall == s1.test_recall);
  CHECK(s2.test_ndcg == s1.test_ndcg);
  CHECK(*s2.kl == *s1.kl);
  CHECK(slurp(root / "a" / "checkpoint.bin") == slurp(root / "b" / "checkpoint.bin"));
  CHECK(metrics_without_time(root / "a" / "metrics.csv") == metrics_without_time(root / "b" / "metrics.csv"));

  const auto report = analyze_run(root / "a");
  CHECK(report.kl == doctest::Approx(*s1.kl).epsilon(1e-12));
  CHECK(report.false_negative.sample_count() > 0);
}

TEST_CASE("manifest without analysis") {
  const auto files = run_manifest(false);
  CHECK(std::find(files.begin(), files.end(), "kl.txt") == files.end());
  CHECK(std::find(files.begin(), files.end(), "checkpoint.bin") != files.end());
}

TEST_CASE("sweep") {
  const auto root = scratch("sweep");

  SUBCASE("a one-cell sweep reproduces run") {
    auto base = tiny(root / "one");
    const auto rows = sweep(base, {{{"loss.kind", "bpr"}}}, 1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].status == "ok");
    auto single = tiny(root / "single");
    const auto s = run_experiment(single);
    CHECK(rows[0].test_recall == s.test_recall);
    CHECK(rows[0].best_val_recall == s.best_val_recall);
    CHECK(fs::exists(root / "one" / "results.csv"));
    CHECK(fs::exists(root / "one" / "cell_000" / "curve.csv"));
  }

  SUBCASE("b-sweep preset") {
    const auto cells = sweep_preset("b-sweep");
    REQUIRE(cells.size() == 4);
    auto base = tiny(root / "b");
    base.set("train.epochs", "1");
    const auto rows = sweep(base, cells, 2);
    CHECK(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.status == "ok");
    std::ifstream in(root / "b" / "results.csv");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == 5);
    CHECK_FALSE(sweep_preset("c-sweep").empty());
    CHECK_THROWS_AS(sweep_preset("z-sweep"), ConfigError);
  }

  SUBCASE("resume skips finished cells and retries failures") {
    auto base = tiny(root / "resume");
    base.set("train.epochs", "1");
    const auto cells = cartesian_grid({{"sampler.pool_size", {"1", "0"}}});
    REQUIRE(cells.size() == 2);
    const auto first = sweep(base, cells, 1);
    CHECK(first[0].status == "ok");
    CHECK(first[1].status.rfind("error", 0) == 0);
    const auto stamp = fs::last_write_time(root / "resume" / "cell_000" / "checkpoint.bin");
    const auto second = sweep(base, cells, 1);
    CHECK(fs::last_write_time(root / "resume" / "cell_000" / "checkpoint.bin") == stamp);
    CHECK(second[0].test_recall == first[0].test_recall);
    CHECK(second[1].status.rfind("error", 0) == 0);
  }

  SUBCASE("parallel equals sequential") {
    const auto cells = cartesian_grid({{"loss.kind", {"bpr", "hardbpr"}}, {"sampler.kind", {"rns", "dns"}}});
    REQUIRE(cells.size() == 4);
    auto a = tiny(root / "seq");
    auto b = tiny(root / "par");
    a.set("train.epochs", "1");
    b.set("train.epochs", "1");
    const auto ra = sweep(a, cells, 1);
    const auto rb = sweep(b, cells, 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(ra[k].overrides == rb[k].overrides);
      CHECK(ra[k].test_recall == rb[k].test_recall);
      CHECK(ra[k].test_ndcg == rb[k].test_ndcg);
    }
  }

  CHECK_THROWS_AS(cartesian_grid({{"nope", {"1"}}}), ConfigError);
  CHECK_THROWS_AS(cartesian_grid({{"loss.b", {}}}), ConfigError);
}
