#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hardrank/data.hpp"

namespace fs = std::filesystem;
using namespace hardrank;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
  const auto dir = fs::temp_directory_path() / "hardrank_test_data";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

std::vector<RawInteraction> rows_for(const std::string& user, int n, std::int64_t t0 = 0) {
  std::vector<RawInteraction> r;
  for (int k = 0; k < n; ++k) r.push_back({user, "i" + std::to_string(k), t0 + k});
  return r;
}

// Ten rows whose val/test tokens all occur earlier, so nothing is cold.
std::vector<RawInteraction> ten_rows(std::int64_t step) {
  const char* pairs[10][2] = {{"a", "x"}, {"b", "y"}, {"a", "y"}, {"b", "z"}, {"a", "w"},
                              {"b", "v"}, {"c", "x"}, {"c", "z"}, {"a", "z"}, {"b", "x"}};
  std::vector<RawInteraction> r;
  for (int k = 0; k < 10; ++k) r.push_back({pairs[k][0], pairs[k][1], 1000 + step * k});
  return r;
}

}  // namespace

TEST_CASE("load_interactions parses rows in order") {
  const auto p = write_temp("ok.tsv", "u1\ti1\t10\nu2\ti2\t5\nu1\ti3\t7\n");
  const auto rows = load_interactions(p, TextFormat::tsv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == RawInteraction{"u1", "i1", 10});
  CHECK(rows[2] == RawInteraction{"u1", "i3", 7});
  const auto csv = load_interactions(write_temp("ok.csv", "a,b,1\r\n"), TextFormat::csv);
  CHECK(csv.size() == 1);
}

TEST_CASE("load_interactions edge cases") {
  CHECK(load_interactions(write_temp("empty.tsv", ""), TextFormat::tsv).empty());
  try {
    load_interactions(write_temp("bad.tsv", "u1\ti1\t10\nu2\ti2\tnoon\n"), TextFormat::tsv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_interactions(write_temp("short.tsv", "u1\ti1\n"), TextFormat::tsv), ParseError);
  CHECK_THROWS_AS(load_interactions("/nonexistent/file.tsv", TextFormat::tsv), IoError);
}

TEST_CASE("k_core_filter") {
  CHECK_THROWS_AS(k_core_filter(rows_for("a", 9), 10), EmptyAfterFilter);
  CHECK(k_core_filter(rows_for("a", 10), 10).size() == 10);
  auto rows = rows_for("a", 12);
  auto small = rows_for("b", 3);
  rows.insert(rows.begin() + 4, small.begin(), small.end());
  const auto kept = k_core_filter(rows, 10);
  CHECK(kept.size() == 12);
  CHECK(std::all_of(kept.begin(), kept.end(), [](const auto& r) { return r.user == "a"; }));
}

TEST_CASE("temporal_split assigns the latest rows to test") {
  auto rows = ten_rows(10);
  std::reverse(rows.begin(), rows.end());  // input order must not matter
  const auto ds = temporal_split(rows);
  REQUIRE(ds.train().size() == 8);
  REQUIRE(ds.val().size() == 1);
  REQUIRE(ds.test().size() == 1);
  CHECK(ds.ids().users[ds.val()[0].user] == "a");
  CHECK(ds.ids().items[ds.val()[0].item] == "z");
  CHECK(ds.ids().users[ds.test()[0].user] == "b");
  CHECK(ds.ids().items[ds.test()[0].item] == "x");
}

TEST_CASE("temporal_split with equal timestamps follows input order") {
  const auto rows = ten_rows(0);
  const auto ds = temporal_split(rows);
  CHECK(ds.ids().items[ds.val()[0].item] == "z");
  CHECK(ds.ids().items[ds.test()[0].item] == "x");
  CHECK(ds.ids().users[ds.test()[0].user] == "b");
  // deterministic across runs
  const auto again = temporal_split(rows);
  CHECK(again.train() == ds.train());
  CHECK(again.test() == ds.test());
}

TEST_CASE("temporal_split drops cold-start and repeated pairs") {
  auto rows = ten_rows(1);
  for (int k = 0; k < 14; ++k) rows.push_back({"d", "p" + std::to_string(k), k});  // early filler
  // 30 rows: the last three are test, the three before them val
  rows.push_back({"a", "i_new", 2000});  // val: item never trained
  rows.push_back({"c", "y", 2001});      // val: fresh pair
  rows.push_back({"a", "x", 2002});      // val: repeats a train pair
  rows.push_back({"e", "x", 2003});      // test: user never trained
  rows.push_back({"b", "w", 2004});      // test: fresh pair
  rows.push_back({"c", "y", 2005});      // test: repeats the val pair
  const auto ds = temporal_split(rows);
  CHECK(ds.val().size() == 1);
  CHECK(ds.test().size() == 1);
  for (const auto* split : {&ds.val(), &ds.test()})
    for (const auto& r : *split) CHECK(!ds.is_train_positive(r.user, r.item));
  std::set<Interaction> all;
  for (const auto* split : {&ds.train(), &ds.val(), &ds.test()})
    for (const auto& r : *split) CHECK(all.insert(r).second);
}

TEST_CASE("temporal_split fails when a split ends empty") {
  std::vector<RawInteraction> rows = rows_for("a", 9);
  rows.push_back({"b", "z", 100});  // only test row is cold start
  CHECK_THROWS_AS(temporal_split(rows), EmptyAfterFilter);
}

TEST_CASE("positive sets agree with a brute-force scan") {
  const auto syn = generate_synthetic({.n_users = 40, .n_items = 80, .latent_dim = 4, .interactions_per_user = 10,
                                       .false_negative_fraction = 0.2, .seed = 3});
  const auto& ds = syn.dataset;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    std::vector<ItemIndex> scan;
    for (const auto& r : ds.train())
      if (r.user == u) scan.push_back(r.item);
    std::sort(scan.begin(), scan.end());
    CHECK(std::vector<ItemIndex>(ds.train_items(u).begin(), ds.train_items(u).end()) == scan);
    for (ItemIndex i = 0; i < ds.n_items(); ++i)
      CHECK(ds.is_train_positive(u, i) == std::binary_search(scan.begin(), scan.end(), i));
  }
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec{.n_users = 200, .n_items = 500, .latent_dim = 8, .interactions_per_user = 30,
                     .false_negative_fraction = 0.2, .noise_level = 0.1, .seed = 7};
  const auto a = generate_synthetic(spec);
  std::vector<int> per_user(200, 0);
  for (const auto& r : a.planted_false_negatives) ++per_user[r.user];
  CHECK(std::all_of(per_user.begin(), per_user.end(), [](int n) { return n == 6; }));

  const auto b = generate_synthetic(spec);
  CHECK(a.dataset.train() == b.dataset.train());
  CHECK(a.dataset.val() == b.dataset.val());
  CHECK(a.dataset.test() == b.dataset.test());
  CHECK(a.planted_false_negatives == b.planted_false_negatives);

  // planted items never appear in any split
  for (const auto& r : a.planted_false_negatives) {
    CHECK(!a.dataset.is_known_positive(r.user, r.item));
    const auto t = a.dataset.test_items(r.user);
    CHECK(!std::binary_search(t.begin(), t.end(), r.item));
  }

  // planted items are among each user's top-30 generator preferences
  const auto lat = synthetic_latents(spec);
  for (const auto& r : a.planted_false_negatives) {
    const Eigen::VectorXd pref = synthetic_preferences(spec, lat, r.user);
    int above = 0;
    for (Eigen::Index i = 0; i < pref.size(); ++i) above += pref[i] > pref[r.item];
    CHECK(above < 30);
  }

  spec.false_negative_fraction = 0.0;
  CHECK(generate_synthetic(spec).planted_false_negatives.empty());
  spec.false_negative_fraction = 0.85;
  CHECK_THROWS_AS(generate_synthetic(spec), SpecError);
}

TEST_CASE("dataset summary") {
  const auto s = summarize(temporal_split(ten_rows(1)));
  CHECK(s.users == 3);
  CHECK(s.items == 5);
  CHECK(s.density == doctest::Approx(10.0 / 15.0));
  std::ostringstream out;
  write_summary_csv(out, s);
  CHECK(out.str() == "#User,#Item,#Train,#Val,#Test,Density\n3,5,8,1,1,0.66667\n");
}

TEST_CASE("presplit and id map round trip") {
  std::vector<std::pair<std::string, std::string>> tr = {{"a", "x"}, {"b", "y"}, {"a", "y"}};
  std::vector<std::pair<std::string, std::string>> va = {{"b", "x"}};
  std::vector<std::pair<std::string, std::string>> te = {{"a", "x"}, {"b", "z"}, {"b", "x"}, {"a", "x"}};
  // test: (a,x) repeats train, (b,z) cold, (b,x) repeats val -> all dropped
  CHECK_THROWS_AS(from_presplit(tr, va, te), EmptyAfterFilter);
  te.push_back({"c", "y"});
  CHECK_THROWS_AS(from_presplit(tr, va, te), EmptyAfterFilter);
  tr.push_back({"c", "x"});
  const auto ds = from_presplit(tr, va, te);
  CHECK(ds.test().size() == 1);
  std::stringstream ss;
  write_id_map(ss, ds.ids());
  const auto back = read_id_map(ss);
  CHECK(back.users == ds.ids().users);
  CHECK(back.items == ds.ids().items);
}
