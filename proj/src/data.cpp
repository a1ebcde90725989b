#include "hardrank/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hardrank {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::vector<std::vector<ItemIndex>> group_by_user(std::int32_t n_users,
                                                  const std::vector<Interaction>& rows) {
  std::vector<std::vector<ItemIndex>> sets(static_cast<std::size_t>(n_users));
  for (const auto& r : rows) sets[r.user].push_back(r.item);
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

// Interns string tokens into dense indices in first-seen order.
class Interner {
 public:
  std::int32_t intern(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, static_cast<std::int32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }
  std::optional<std::int32_t> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }
  std::vector<std::string> release() { return std::move(tokens_); }

 private:
  std::unordered_map<std::string, std::int32_t> index_;
  std::vector<std::string> tokens_;
};

// Indexes token pairs: train defines the vocabulary; val/test rows with unseen
// tokens are dropped, and each pair is kept only at its first appearance
// across train -> val -> test.
InteractionDataset index_splits(
    const std::vector<std::pair<const std::string*, const std::string*>>& train,
    const std::vector<std::pair<const std::string*, const std::string*>>& val,
    const std::vector<std::pair<const std::string*, const std::string*>>& test) {
  Interner users, items;
  std::set<Interaction> seen;
  std::vector<Interaction> tr, va, te;
  for (auto [u, i] : train) {
    Interaction r{users.intern(*u), items.intern(*i)};
    if (seen.insert(r).second) tr.push_back(r);
  }
  auto add_held_out = [&](const auto& rows, std::vector<Interaction>& out) {
    for (auto [u, i] : rows) {
      auto ui = users.find(*u);
      auto ii = items.find(*i);
      if (!ui || !ii) continue;
      Interaction r{*ui, *ii};
      if (seen.insert(r).second) out.push_back(r);
    }
  };
  add_held_out(val, va);
  add_held_out(test, te);
  if (tr.empty()) throw EmptyAfterFilter("train split is empty");
  if (va.empty()) throw EmptyAfterFilter("validation split is empty after cold-start removal");
  if (te.empty()) throw EmptyAfterFilter("test split is empty after cold-start removal");
  std::int32_t nu = users.size(), ni = items.size();
  IdMap ids{users.release(), items.release()};
  return InteractionDataset(nu, ni, std::move(tr), std::move(va), std::move(te), std::move(ids));
}

}  // namespace

char delimiter(TextFormat format) noexcept { return format == TextFormat::csv ? ',' : '\t'; }

TextFormat parse_text_format(const std::string& name) {
  if (name == "tsv") return TextFormat::tsv;
  if (name == "csv") return TextFormat::csv;
  throw SpecError("unknown text format '" + name + "' (expected tsv or csv)");
}

std::vector<RawInteraction> load_interactions(const std::filesystem::path& path, TextFormat format) {
  auto in = open_or_throw(path);
  std::vector<RawInteraction> rows;
  std::string line;
  std::size_t line_no = 0;
  const char sep = delimiter(format);
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item token");
    std::int64_t ts = 0;
    auto f = fields[2];
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), ts);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
      throw ParseError(line_no, "timestamp '" + std::string(f) + "' is not an integer");
    rows.push_back({std::string(fields[0]), std::string(fields[1]), ts});
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return rows;
}

std::vector<std::pair<std::string, std::string>> load_pairs(const std::filesystem::path& path,
                                                            TextFormat format) {
  auto in = open_or_throw(path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  const char sep = delimiter(format);
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() != 2)
      throw ParseError(line_no, "expected 2 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item token");
    rows.emplace_back(std::string(fields[0]), std::string(fields[1]));
  }
  return rows;
}

std::vector<RawInteraction> k_core_filter(std::span<const RawInteraction> rows, std::size_t k) {
  if (k < 1) throw SpecError("k-core threshold must be >= 1");
  std::vector<RawInteraction> current(rows.begin(), rows.end());
  while (true) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& r : current) ++counts[r.user];
    std::vector<RawInteraction> next;
    next.reserve(current.size());
    for (const auto& r : current)
      if (counts[r.user] >= k) next.push_back(r);
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  if (current.empty()) throw EmptyAfterFilter("no user has at least " + std::to_string(k) + " interactions");
  return current;
}

InteractionDataset::InteractionDataset(std::int32_t n_users, std::int32_t n_items,
                                       std::vector<Interaction> train, std::vector<Interaction> val,
                                       std::vector<Interaction> test, IdMap ids)
    : n_users_(n_users),
      n_items_(n_items),
      train_(std::move(train)),
      val_(std::move(val)),
      test_(std::move(test)),
      ids_(std::move(ids)) {
  if (n_users <= 0 || n_items <= 0) throw SpecError("dataset needs at least one user and one item");
  std::set<Interaction> all;
  for (const auto* split : {&train_, &val_, &test_}) {
    for (const auto& r : *split) {
      if (r.user < 0 || r.user >= n_users || r.item < 0 || r.item >= n_items)
        throw SpecError("interaction index out of range");
      if (!all.insert(r).second) throw SpecError("duplicate interaction across or within splits");
    }
  }
  train_sets_ = group_by_user(n_users, train_);
  val_sets_ = group_by_user(n_users, val_);
  test_sets_ = group_by_user(n_users, test_);
  known_sets_.resize(static_cast<std::size_t>(n_users));
  for (std::int32_t u = 0; u < n_users; ++u) {
    auto& k = known_sets_[u];
    std::merge(train_sets_[u].begin(), train_sets_[u].end(), val_sets_[u].begin(), val_sets_[u].end(),
               std::back_inserter(k));
  }
}

bool InteractionDataset::is_train_positive(UserIndex u, ItemIndex i) const {
  const auto& s = train_sets_[u];
  return std::binary_search(s.begin(), s.end(), i);
}

bool InteractionDataset::is_known_positive(UserIndex u, ItemIndex i) const {
  const auto& s = known_sets_[u];
  return std::binary_search(s.begin(), s.end(), i);
}

InteractionDataset temporal_split(std::span<const RawInteraction> rows, SplitFractions fractions) {
  if (rows.empty()) throw EmptyAfterFilter("no interactions to split");
  if (fractions.val < 0 || fractions.test < 0 || fractions.val + fractions.test >= 1.0)
    throw SpecError("invalid split fractions");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return rows[x].timestamp < rows[y].timestamp; });
  const auto n = static_cast<double>(rows.size());
  const auto n_test = static_cast<std::size_t>(std::llround(n * fractions.test));
  const auto n_val = static_cast<std::size_t>(std::llround(n * fractions.val));
  if (n_test + n_val >= rows.size()) throw EmptyAfterFilter("too few interactions for a three-way split");
  const std::size_t n_train = rows.size() - n_test - n_val;

  using Ref = std::pair<const std::string*, const std::string*>;
  std::vector<Ref> tr, va, te;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = rows[order[k]];
    Ref ref{&r.user, &r.item};
    if (k < n_train) tr.push_back(ref);
    else if (k < n_train + n_val) va.push_back(ref);
    else te.push_back(ref);
  }
  return index_splits(tr, va, te);
}

InteractionDataset from_presplit(std::span<const std::pair<std::string, std::string>> train,
                                 std::span<const std::pair<std::string, std::string>> val,
                                 std::span<const std::pair<std::string, std::string>> test) {
  using Ref = std::pair<const std::string*, const std::string*>;
  auto refs = [](auto rows) {
    std::vector<Ref> out;
    out.reserve(rows.size());
    for (const auto& [u, i] : rows) out.emplace_back(&u, &i);
    return out;
  };
  return index_splits(refs(train), refs(val), refs(test));
}

void write_id_map(std::ostream& out, const IdMap& ids) {
  for (std::size_t k = 0; k < ids.users.size(); ++k) out << "user\t" << k << '\t' << ids.users[k] << '\n';
  for (std::size_t k = 0; k < ids.items.size(); ++k) out << "item\t" << k << '\t' << ids.items[k] << '\n';
}

IdMap read_id_map(std::istream& in) {
  IdMap ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 3) throw ParseError(line_no, "id map rows are kind<TAB>index<TAB>token");
    auto& target = f[0] == "user" ? ids.users : ids.items;
    if (f[0] != "user" && f[0] != "item") throw ParseError(line_no, "unknown id kind");
    std::size_t idx = 0;
    std::from_chars(f[1].data(), f[1].data() + f[1].size(), idx);
    if (idx != target.size()) throw ParseError(line_no, "id map indices must be dense and ordered");
    target.emplace_back(f[2]);
  }
  return ids;
}

DatasetSummary summarize(const InteractionDataset& dataset) {
  DatasetSummary s;
  s.users = dataset.n_users();
  s.items = dataset.n_items();
  s.train = static_cast<std::int64_t>(dataset.train().size());
  s.val = static_cast<std::int64_t>(dataset.val().size());
  s.test = static_cast<std::int64_t>(dataset.test().size());
  s.density = static_cast<double>(s.train + s.val + s.test) /
              (static_cast<double>(s.users) * static_cast<double>(s.items));
  return s;
}

void write_summary_csv(std::ostream& out, const DatasetSummary& s) {
  out << "#User,#Item,#Train,#Val,#Test,Density\n";
  out << s.users << ',' << s.items << ',' << s.train << ',' << s.val << ',' << s.test << ','
      << std::setprecision(5) << std::fixed << s.density << '\n';
  out << std::defaultfloat << std::setprecision(6);
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_users < 1 || spec.n_items < 2 || spec.latent_dim < 1)
    throw SpecError("synthetic spec needs positive user, item and latent counts");
  if (spec.interactions_per_user < 3 || spec.interactions_per_user >= spec.n_items)
    throw SpecError("interactions_per_user must be in [3, n_items)");
  if (spec.false_negative_fraction < 0 || spec.false_negative_fraction >= 1)
    throw SpecError("false_negative_fraction must be in [0, 1)");
  if (spec.val_fraction < 0 || spec.test_fraction < 0)
    throw SpecError("val/test fractions must be nonnegative");
  if (spec.false_negative_fraction + spec.val_fraction + spec.test_fraction >= 1)
    throw SpecError("false negative, val and test fractions must sum below 1");
  if (spec.noise_level < 0) throw SpecError("noise_level must be nonnegative");
  const double m = spec.interactions_per_user;
  const auto taken = std::llround(m * spec.false_negative_fraction) + std::llround(m * spec.val_fraction) +
                     std::llround(m * spec.test_fraction);
  if (taken >= spec.interactions_per_user) throw SpecError("fractions leave no training interactions");
}

SyntheticLatents synthetic_latents(const SyntheticSpec& spec) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticLatents lat{Eigen::MatrixXd(spec.n_users, spec.latent_dim),
                       Eigen::MatrixXd(spec.n_items, spec.latent_dim)};
  Rng ur = make_rng(spec.seed, "synthetic.users");
  for (Eigen::Index r = 0; r < lat.users.rows(); ++r)
    for (Eigen::Index c = 0; c < lat.users.cols(); ++c) lat.users(r, c) = normal(ur);
  Rng ir = make_rng(spec.seed, "synthetic.items");
  for (Eigen::Index r = 0; r < lat.items.rows(); ++r)
    for (Eigen::Index c = 0; c < lat.items.cols(); ++c) lat.items(r, c) = normal(ir);
  return lat;
}

Eigen::VectorXd synthetic_preferences(const SyntheticSpec& spec, const SyntheticLatents& latents,
                                      UserIndex u) {
  Eigen::VectorXd scores = latents.items * latents.users.row(u).transpose();
  scores /= std::sqrt(static_cast<double>(spec.latent_dim));
  if (spec.noise_level > 0) {
    std::normal_distribution<double> normal(0.0, spec.noise_level);
    Rng nr = make_rng(spec.seed, "synthetic.noise", {static_cast<std::uint64_t>(u)});
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores[i] += normal(nr);
  }
  return scores;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const auto lat = synthetic_latents(spec);
  const int m = spec.interactions_per_user;
  const auto n_fn = static_cast<int>(std::llround(m * spec.false_negative_fraction));
  const auto n_test = static_cast<int>(std::llround(m * spec.test_fraction));
  const auto n_val = static_cast<int>(std::llround(m * spec.val_fraction));

  std::vector<Interaction> train, val, test, planted;
  std::vector<ItemIndex> order(static_cast<std::size_t>(spec.n_items));
  for (UserIndex u = 0; u < spec.n_users; ++u) {
    const Eigen::VectorXd pref = synthetic_preferences(spec, lat, u);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](ItemIndex x, ItemIndex y) {
      return pref[x] > pref[y] || (pref[x] == pref[y] && x < y);
    });
    std::vector<ItemIndex> top(order.begin(), order.begin() + m);
    Rng sr = make_rng(spec.seed, "synthetic.split", {static_cast<std::uint64_t>(u)});
    std::shuffle(top.begin(), top.end(), sr);
    int k = 0;
    for (; k < n_fn; ++k) planted.push_back({u, top[k]});
    for (int e = k + n_test; k < e; ++k) test.push_back({u, top[k]});
    for (int e = k + n_val; k < e; ++k) val.push_back({u, top[k]});
    for (; k < m; ++k) train.push_back({u, top[k]});
  }
  IdMap ids;
  ids.users.reserve(spec.n_users);
  ids.items.reserve(spec.n_items);
  for (int u = 0; u < spec.n_users; ++u) ids.users.push_back("u" + std::to_string(u));
  for (int i = 0; i < spec.n_items; ++i) ids.items.push_back("i" + std::to_string(i));
  return {InteractionDataset(spec.n_users, spec.n_items, std::move(train), std::move(val), std::move(test),
                             std::move(ids)),
          std::move(planted)};
}

}  // namespace hardrank
