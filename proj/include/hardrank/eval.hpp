#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hardrank/data.hpp"
#include "hardrank/model.hpp"

namespace hardrank {

enum class Split : std::uint8_t { val, test };
std::string to_string(Split split);

/// Which known positives are removed from the candidate list before ranking.
enum class ExclusionPolicy : std::uint8_t {
  train_only,     // val ranking, and test ranking when val positives are kept
  train_and_val,  // default for test ranking
};

struct MetricReport {
  int epoch = 0;
  Split split = Split::val;
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t users_evaluated = 0;
};

/// Top-K items by descending score, ties to the lower index, skipping the
/// sorted `exclusion` list.
std::vector<ItemIndex> rank_items(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  std::span<const ItemIndex> exclusion, int k);
std::vector<ItemIndex> rank_items(const ScoringModel& model, UserIndex u, std::span<const ItemIndex> exclusion,
                                  int k);

double recall_at_k(std::span<const ItemIndex> ranked, std::span<const ItemIndex> ground_truth);
/// Binary-relevance NDCG over the ranked list; the ideal list has
/// min(|ranked|, |ground_truth|) hits.
double ndcg_at_k(std::span<const ItemIndex> ranked, std::span<const ItemIndex> ground_truth);

/// Macro-averaged Recall@K / NDCG@K over users with nonempty ground truth.
/// Val ranking always excludes train positives only.
MetricReport evaluate(const ScoringModel& model, const InteractionDataset& dataset, Split split, int k,
                      ExclusionPolicy policy, int workers = worker_count());

/// Policy used for a split given the test-side flag.
inline ExclusionPolicy exclusion_for(Split split, bool exclude_val_from_test) {
  if (split == Split::val) return ExclusionPolicy::train_only;
  return exclude_val_from_test ? ExclusionPolicy::train_and_val : ExclusionPolicy::train_only;
}

}  // namespace hardrank
