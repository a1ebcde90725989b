#include "hardrank/sampling.hpp"

#include <algorithm>

namespace hardrank {

std::string to_string(SamplerKind kind) { return kind == SamplerKind::rns ? "rns" : "dns"; }

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "rns") return SamplerKind::rns;
  if (name == "dns") return SamplerKind::dns;
  throw SpecError("unknown sampler '" + name + "' (expected rns or dns)");
}

void validate(const SamplerConfig& config) {
  if (config.pool_size < 1) throw SpecError("pool size H must be >= 1");
  if (config.rejection_cap < 0) throw SpecError("rejection cap must be nonnegative");
}

ItemIndex sample_uniform_negative(const InteractionDataset& dataset, UserIndex u, Rng& rng, int rejection_cap) {
  const auto positives = dataset.train_items(u);
  const std::int32_t n_items = dataset.n_items();
  const auto n_negative = static_cast<std::int64_t>(n_items) - static_cast<std::int64_t>(positives.size());
  if (n_negative <= 0) throw NoNegativeAvailable("user " + std::to_string(u) + " has interacted with every item");
  std::uniform_int_distribution<ItemIndex> any(0, n_items - 1);
  for (int attempt = 0; attempt < rejection_cap; ++attempt) {
    const ItemIndex j = any(rng);
    if (!std::binary_search(positives.begin(), positives.end(), j)) return j;
  }
  // Pick the k-th non-positive item by walking the sorted positive list.
  std::uniform_int_distribution<std::int64_t> pick(0, n_negative - 1);
  std::int64_t k = pick(rng);
  ItemIndex candidate = static_cast<ItemIndex>(k);
  for (ItemIndex p : positives) {
    if (p <= candidate) ++candidate;
    else break;
  }
  return candidate;
}

}  // namespace hardrank
