#include "hardrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hardrank {

std::string to_string(Split split) { return split == Split::val ? "val" : "test"; }

std::vector<ItemIndex> rank_items(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  std::span<const ItemIndex> exclusion, int k) {
  const auto n = static_cast<std::int64_t>(scores.size());
  std::vector<ItemIndex> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  std::size_t e = 0;
  for (ItemIndex i = 0; i < n; ++i) {
    while (e < exclusion.size() && exclusion[e] < i) ++e;
    if (e < exclusion.size() && exclusion[e] == i) continue;
    candidates.push_back(i);
  }
  if (k < 0 || static_cast<std::size_t>(k) > candidates.size())
    throw KTooLarge("K=" + std::to_string(k) + " exceeds " + std::to_string(candidates.size()) +
                    " rankable items");
  auto better = [&](ItemIndex x, ItemIndex y) { return scores[x] > scores[y] || (scores[x] == scores[y] && x < y); };
  auto mid = candidates.begin() + k;
  if (mid != candidates.end()) std::nth_element(candidates.begin(), mid, candidates.end(), better);
  candidates.resize(static_cast<std::size_t>(k));
  std::sort(candidates.begin(), candidates.end(), better);
  return candidates;
}

std::vector<ItemIndex> rank_items(const ScoringModel& model, UserIndex u, std::span<const ItemIndex> exclusion,
                                  int k) {
  return rank_items(model.score_all(u), exclusion, k);
}

namespace {

std::vector<ItemIndex> sorted_copy(std::span<const ItemIndex> s) {
  std::vector<ItemIndex> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

double recall_at_k(std::span<const ItemIndex> ranked, std::span<const ItemIndex> ground_truth) {
  if (ground_truth.empty()) throw EmptyGroundTruth("recall needs a nonempty ground truth");
  const auto gt = sorted_copy(ground_truth);
  std::size_t hits = 0;
  for (ItemIndex i : ranked) hits += std::binary_search(gt.begin(), gt.end(), i);
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

double ndcg_at_k(std::span<const ItemIndex> ranked, std::span<const ItemIndex> ground_truth) {
  if (ground_truth.empty()) throw EmptyGroundTruth("ndcg needs a nonempty ground truth");
  const auto gt = sorted_copy(ground_truth);
  double dcg = 0.0;
  for (std::size_t p = 0; p < ranked.size(); ++p)
    if (std::binary_search(gt.begin(), gt.end(), ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(ranked.size(), gt.size());
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

MetricReport evaluate(const ScoringModel& model, const InteractionDataset& dataset, Split split, int k,
                      ExclusionPolicy policy, int workers) {
  const auto n_users = static_cast<std::size_t>(dataset.n_users());
  std::vector<double> recall(n_users, 0.0), ndcg(n_users, 0.0);
  std::vector<char> counted(n_users, 0);
  parallel_for(
      n_users,
      [&](std::size_t uu) {
        const auto u = static_cast<UserIndex>(uu);
        const auto gt = split == Split::val ? dataset.val_items(u) : dataset.test_items(u);
        if (gt.empty()) return;
        const bool train_only = split == Split::val || policy == ExclusionPolicy::train_only;
        const auto excl = train_only ? dataset.train_items(u) : dataset.known_items(u);
        const int available = dataset.n_items() - static_cast<int>(excl.size());
        const auto ranked = rank_items(model, u, excl, std::min(k, available));
        recall[uu] = recall_at_k(ranked, gt);
        ndcg[uu] = ndcg_at_k(ranked, gt);
        counted[uu] = 1;
      },
      workers);
  MetricReport report;
  report.split = split;
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!counted[u]) continue;
    report.recall += recall[u];
    report.ndcg += ndcg[u];
    ++report.users_evaluated;
  }
  if (report.users_evaluated > 0) {
    report.recall /= static_cast<double>(report.users_evaluated);
    report.ndcg /= static_cast<double>(report.users_evaluated);
  }
  return report;
}

}  // namespace hardrank
