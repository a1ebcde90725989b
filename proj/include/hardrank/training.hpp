#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hardrank/data.hpp"
#include "hardrank/eval.hpp"
#include "hardrank/model.hpp"
#include "hardrank/prefcurve.hpp"
#include "hardrank/sampling.hpp"

namespace hardrank {

enum class LossKind : std::uint8_t { bpr, hard_bpr };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::bpr;
  PreferenceCurve<double> curve;  // used by hard_bpr only
  double l2 = 0.0;
};

void validate(const LossConfig& config);

/// Per-triple loss for a margin x: -ln sigmoid(x) (BPR) or -ln g(x) (Hard-BPR).
double triple_loss(const LossConfig& loss, double margin);
/// Gradient magnitude for a margin x: 1 - sigmoid(x) (BPR) or delta_g(x).
double triple_weight(const LossConfig& loss, double margin);

/// f(i|u) - f(j|u) on the model's scoring view.
double pairwise_margin(const ScoringModel& model, UserIndex u, ItemIndex i, ItemIndex j);

/// Mean per-triple loss plus l2/2 times the squared norm of every distinct
/// parameter row referenced by the batch.
double batch_loss(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss);

/// The gradient magnitude applied to each triple.
std::vector<double> triple_weights(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss);

/// Analytic gradient of batch_loss w.r.t. the parameter table, one entry per
/// distinct row, sorted by (kind, row).
SparseGradient batch_gradients(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 2048;
  int eval_every = 1;
  int early_stop_patience = 10;  // evaluations without val improvement; 0 disables
  int top_k = 50;
  std::uint64_t seed = 0;
  bool exclude_val_from_test = true;
  bool evaluate_test = true;
  AdamConfig adam;
};

void validate(const TrainConfig& config);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainResult {
  EmbeddingTable best_parameters;
  int best_epoch = 0;  // 0 = the initial parameters
  double best_val_recall = -1.0;
  std::vector<MetricReport> curve;  // val (and test) reports per evaluation
  std::vector<EpochStats> epochs;
};

/// Called after each evaluation with the result so far; return false to stop.
using EvalCallback = std::function<bool(const TrainResult&)>;

/// Epoch loop: shuffle train positives, then per mini-batch sample triples,
/// compute gradients and take one Adam step. Keeps the parameters with the
/// best validation Recall@K. `model` is left at its final state.
TrainResult train(const InteractionDataset& dataset, ScoringModel& model, const SamplerConfig& sampler,
                  const LossConfig& loss, const TrainConfig& config, const EvalCallback& on_eval = {});

/// `epoch,split,recall_at_K,ndcg_at_K,mean_loss,elapsed_ms` rows.
void write_metrics_csv(std::ostream& out, const TrainResult& result, int k);

}  // namespace hardrank
