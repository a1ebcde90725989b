#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hardrank/common.hpp"

namespace hardrank {

struct RawInteraction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;

  friend bool operator==(const RawInteraction&, const RawInteraction&) = default;
};

enum class TextFormat { tsv, csv };

char delimiter(TextFormat format) noexcept;
TextFormat parse_text_format(const std::string& name);

/// Reads `user<sep>item<sep>timestamp` rows. Blank lines are skipped.
std::vector<RawInteraction> load_interactions(const std::filesystem::path& path, TextFormat format);

/// Reads `user<sep>item` rows of a pre-split file.
std::vector<std::pair<std::string, std::string>> load_pairs(const std::filesystem::path& path,
                                                            TextFormat format);

/// Drops users with fewer than k rows until every remaining user has at least k.
/// Items are never filtered. Row order is preserved.
std::vector<RawInteraction> k_core_filter(std::span<const RawInteraction> rows, std::size_t k);

/// Dense index <-> original token mapping.
struct IdMap {
  std::vector<std::string> users;
  std::vector<std::string> items;
};

void write_id_map(std::ostream& out, const IdMap& ids);
IdMap read_id_map(std::istream& in);

/// Indexed implicit-feedback dataset with disjoint train / val / test splits.
/// Immutable after construction.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  InteractionDataset(std::int32_t n_users, std::int32_t n_items, std::vector<Interaction> train,
                     std::vector<Interaction> val, std::vector<Interaction> test, IdMap ids = {});

  std::int32_t n_users() const noexcept { return n_users_; }
  std::int32_t n_items() const noexcept { return n_items_; }

  const std::vector<Interaction>& train() const noexcept { return train_; }
  const std::vector<Interaction>& val() const noexcept { return val_; }
  const std::vector<Interaction>& test() const noexcept { return test_; }
  const IdMap& ids() const noexcept { return ids_; }

  /// Sorted train items of u, i.e. I+(u) restricted to train.
  std::span<const ItemIndex> train_items(UserIndex u) const { return train_sets_[u]; }
  std::span<const ItemIndex> val_items(UserIndex u) const { return val_sets_[u]; }
  std::span<const ItemIndex> test_items(UserIndex u) const { return test_sets_[u]; }
  /// Sorted union of train and val items of u.
  std::span<const ItemIndex> known_items(UserIndex u) const { return known_sets_[u]; }

  bool is_train_positive(UserIndex u, ItemIndex i) const;
  bool is_known_positive(UserIndex u, ItemIndex i) const;

 private:
  std::int32_t n_users_ = 0;
  std::int32_t n_items_ = 0;
  std::vector<Interaction> train_, val_, test_;
  std::vector<std::vector<ItemIndex>> train_sets_, val_sets_, test_sets_, known_sets_;
  IdMap ids_;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Global timeline split: stable sort by timestamp, the latest `test` share
/// goes to test, the preceding `val` share to val, the rest to train.
/// Indices follow first occurrence in train. Val/test rows with users or items
/// unseen in train are dropped, as are pairs already present in an earlier split.
InteractionDataset temporal_split(std::span<const RawInteraction> rows, SplitFractions fractions = {});

/// Builds a dataset from externally split (user, item) token pairs.
InteractionDataset from_presplit(std::span<const std::pair<std::string, std::string>> train,
                                 std::span<const std::pair<std::string, std::string>> val,
                                 std::span<const std::pair<std::string, std::string>> test);

struct DatasetSummary {
  std::int64_t users = 0;
  std::int64_t items = 0;
  std::int64_t train = 0;
  std::int64_t val = 0;
  std::int64_t test = 0;
  double density = 0.0;
};

DatasetSummary summarize(const InteractionDataset& dataset);
/// `#User,#Item,#Train,#Val,#Test,Density` header plus one row.
void write_summary_csv(std::ostream& out, const DatasetSummary& summary);

struct SyntheticSpec {
  std::int32_t n_users = 200;
  std::int32_t n_items = 500;
  std::int32_t latent_dim = 8;
  std::int32_t interactions_per_user = 30;
  double false_negative_fraction = 0.2;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  double noise_level = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticLatents {
  Eigen::MatrixXd users;  // n_users x latent_dim
  Eigen::MatrixXd items;  // n_items x latent_dim
};

struct SyntheticData {
  InteractionDataset dataset;
  std::vector<Interaction> planted_false_negatives;
};

void validate(const SyntheticSpec& spec);

/// Gaussian latent factors behind a synthetic dataset.
SyntheticLatents synthetic_latents(const SyntheticSpec& spec);

/// Generator preference of user u for every item: latent dot product scaled by
/// 1/sqrt(dim) plus Gaussian noise of scale noise_level.
Eigen::VectorXd synthetic_preferences(const SyntheticSpec& spec, const SyntheticLatents& latents,
                                      UserIndex u);

/// Planted-preference dataset. Each user's top interactions_per_user items are
/// the true positives; a false_negative_fraction of them is withheld from
/// every split and returned separately, then val/test shares are carved out
/// of the rest.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace hardrank
