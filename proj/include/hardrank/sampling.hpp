#pragma once

#include <atomic>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hardrank/common.hpp"
#include "hardrank/data.hpp"

namespace hardrank {

template <typename S>
concept Scorer = requires(const S& s, UserIndex u, ItemIndex i) {
  { s.score(u, i) } -> std::convertible_to<double>;
};

enum class SamplerKind : std::uint8_t { rns, dns };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& name);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::rns;
  int pool_size = 1;  // H; ignored by RNS
  std::uint64_t seed = 0;
  int rejection_cap = 100;

  int effective_pool() const noexcept { return kind == SamplerKind::rns ? 1 : pool_size; }
};

void validate(const SamplerConfig& config);

struct Triple {
  UserIndex user;
  ItemIndex positive;
  ItemIndex negative;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripletBatch {
  std::vector<Triple> triples;
  /// Max pool score per triple (DNS only, empty for RNS).
  std::vector<double> pool_scores;

  friend bool operator==(const TripletBatch&, const TripletBatch&) = default;
};

/// Uniform draw from I \ I+(u): rejection against the train positives, then
/// exact sampling from the enumerated complement once rejection_cap draws failed.
ItemIndex sample_uniform_negative(const InteractionDataset& dataset, UserIndex u, Rng& rng,
                                  int rejection_cap = 100);

struct DnsDraw {
  ItemIndex item;
  double score;
  std::vector<ItemIndex> pool;
};

/// Draws H legal negatives with replacement and keeps the best-scored one.
/// Ties go to the earliest pool position.
template <Scorer S>
DnsDraw sample_dns_negative(const InteractionDataset& dataset, const S& model, UserIndex u, int pool_size,
                            Rng& rng, int rejection_cap = 100) {
  if (pool_size < 1) throw SpecError("pool size must be >= 1");
  DnsDraw draw{-1, 0.0, {}};
  draw.pool.reserve(static_cast<std::size_t>(pool_size));
  for (int h = 0; h < pool_size; ++h) draw.pool.push_back(sample_uniform_negative(dataset, u, rng, rejection_cap));
  for (int h = 0; h < pool_size; ++h) {
    const double s = model.score(u, draw.pool[h]);
    if (h == 0 || s > draw.score) {
      draw.score = s;
      draw.item = draw.pool[h];
    }
  }
  return draw;
}

/// Per-row random stream of a batch: (seed, batch index, row).
inline Rng row_rng(const SamplerConfig& config, std::uint64_t batch_index, std::uint64_t row) {
  return make_rng(config.seed, "sampler", {batch_index, row});
}

/// One negative per positive pair. Rows use independent streams, so the result
/// does not depend on the worker count.
template <Scorer S>
TripletBatch build_batch(const InteractionDataset& dataset, const S& model, std::span<const Interaction> positives,
                         const SamplerConfig& config, std::uint64_t batch_index, int workers = worker_count()) {
  if (positives.empty()) throw SpecError("cannot build an empty batch");
  validate(config);
  TripletBatch batch;
  batch.triples.resize(positives.size());
  const bool dns = config.kind == SamplerKind::dns;
  if (dns) batch.pool_scores.resize(positives.size());
  parallel_for(
      positives.size(),
      [&](std::size_t r) {
        Rng rng = row_rng(config, batch_index, r);
        const auto& p = positives[r];
        if (dns) {
          auto d = sample_dns_negative(dataset, model, p.user, config.pool_size, rng, config.rejection_cap);
          batch.triples[r] = {p.user, p.item, d.item};
          batch.pool_scores[r] = d.score;
        } else {
          batch.triples[r] = {p.user, p.item, sample_uniform_negative(dataset, p.user, rng, config.rejection_cap)};
        }
      },
      workers);
  return batch;
}

/// Wraps a scorer and counts score() calls.
template <Scorer S>
class CountingScorer {
 public:
  explicit CountingScorer(const S& inner) : inner_(inner) {}
  double score(UserIndex u, ItemIndex i) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.score(u, i);
  }
  std::uint64_t calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_.store(0); }

 private:
  const S& inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace hardrank
