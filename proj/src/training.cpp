#include "hardrank/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace hardrank {

std::string to_string(LossKind kind) { return kind == LossKind::bpr ? "bpr" : "hardbpr"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "bpr") return LossKind::bpr;
  if (name == "hardbpr") return LossKind::hard_bpr;
  throw SpecError("unknown loss '" + name + "' (expected bpr or hardbpr)");
}

void validate(const LossConfig& config) {
  if (!(config.l2 >= 0) || !std::isfinite(config.l2)) throw SpecError("l2 must be a finite nonnegative value");
}

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw SpecError("epochs must be nonnegative");
  if (c.batch_size < 1 || c.eval_every < 1 || c.top_k < 1) throw SpecError("batch size, eval interval and K must be positive");
  if (c.early_stop_patience < 0) throw SpecError("patience must be nonnegative");
}

double triple_loss(const LossConfig& loss, double margin) {
  return loss.kind == LossKind::bpr ? neg_log_sigmoid(margin) : neg_log_g(loss.curve, margin);
}

double triple_weight(const LossConfig& loss, double margin) {
  return loss.kind == LossKind::bpr ? delta_sigma(margin) : delta_g(loss.curve, margin);
}

double pairwise_margin(const ScoringModel& model, UserIndex u, ItemIndex i, ItemIndex j) {
  return model.score(u, i) - model.score(u, j);
}

namespace {

struct TouchedRows {
  std::vector<std::int32_t> users;
  std::vector<std::int32_t> items;
};

TouchedRows touched_rows(const TripletBatch& batch) {
  TouchedRows t;
  for (const auto& tr : batch.triples) {
    t.users.push_back(tr.user);
    t.items.push_back(tr.positive);
    t.items.push_back(tr.negative);
  }
  for (auto* v : {&t.users, &t.items}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return t;
}

}  // namespace

double batch_loss(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss) {
  if (batch.triples.empty()) throw SpecError("batch_loss on an empty batch");
  double data = 0.0;
  for (const auto& t : batch.triples) data += triple_loss(loss, pairwise_margin(model, t.user, t.positive, t.negative));
  data /= static_cast<double>(batch.triples.size());
  if (loss.l2 == 0.0) return data;
  const auto rows = touched_rows(batch);
  const auto& p = model.parameters();
  double reg = 0.0;
  for (auto u : rows.users) reg += p.users.row(u).squaredNorm();
  for (auto i : rows.items) reg += p.items.row(i).squaredNorm();
  return data + 0.5 * loss.l2 * reg;
}

std::vector<double> triple_weights(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss) {
  std::vector<double> w;
  w.reserve(batch.triples.size());
  for (const auto& t : batch.triples)
    w.push_back(triple_weight(loss, pairwise_margin(model, t.user, t.positive, t.negative)));
  return w;
}

SparseGradient batch_gradients(const TripletBatch& batch, const ScoringModel& model, const LossConfig& loss) {
  if (batch.triples.empty()) throw SpecError("batch_gradients on an empty batch");
  const auto& view = model.view();
  const double scale = 1.0 / static_cast<double>(batch.triples.size());
  const auto weights = triple_weights(batch, model, loss);

  SparseGradient grads;
  if (model.kind() == ModelKind::mf) {
    grads.reserve(batch.triples.size() * 3);
    for (std::size_t k = 0; k < batch.triples.size(); ++k) {
      const auto& t = batch.triples[k];
      const double w = weights[k] * scale;
      const auto eu = view.users.row(t.user).transpose();
      const auto ei = view.items.row(t.positive).transpose();
      const auto ej = view.items.row(t.negative).transpose();
      grads.push_back({RowKind::user, t.user, -w * (ei - ej)});
      grads.push_back({RowKind::item, t.positive, -w * eu});
      grads.push_back({RowKind::item, t.negative, w * eu});
    }
    grads = accumulate(grads);
  } else {
    EmbeddingTable vg{RowMatrix<double>::Zero(view.n_users(), view.dim()),
                      RowMatrix<double>::Zero(view.n_items(), view.dim())};
    for (std::size_t k = 0; k < batch.triples.size(); ++k) {
      const auto& t = batch.triples[k];
      const double w = weights[k] * scale;
      vg.users.row(t.user) -= w * (view.items.row(t.positive) - view.items.row(t.negative));
      vg.items.row(t.positive) -= w * view.users.row(t.user);
      vg.items.row(t.negative) += w * view.users.row(t.user);
    }
    const EmbeddingTable pg = model.pull_back(vg);
    for (Eigen::Index u = 0; u < pg.n_users(); ++u)
      if (!pg.users.row(u).isZero(0.0))
        grads.push_back({RowKind::user, static_cast<std::int32_t>(u), pg.users.row(u).transpose()});
    for (Eigen::Index i = 0; i < pg.n_items(); ++i)
      if (!pg.items.row(i).isZero(0.0))
        grads.push_back({RowKind::item, static_cast<std::int32_t>(i), pg.items.row(i).transpose()});
  }

  if (loss.l2 != 0.0) {
    const auto rows = touched_rows(batch);
    const auto& p = model.parameters();
    SparseGradient reg;
    for (auto u : rows.users) reg.push_back({RowKind::user, u, loss.l2 * p.users.row(u).transpose()});
    for (auto i : rows.items) reg.push_back({RowKind::item, i, loss.l2 * p.items.row(i).transpose()});
    grads.insert(grads.end(), reg.begin(), reg.end());
    grads = accumulate(grads);
  }
  return grads;
}

TrainResult train(const InteractionDataset& dataset, ScoringModel& model, const SamplerConfig& sampler,
                  const LossConfig& loss, const TrainConfig& config, const EvalCallback& on_eval) {
  validate(sampler);
  validate(loss);
  validate(config);
  TrainResult result;
  result.best_parameters = model.parameters();
  if (config.epochs == 0) return result;

  OptimizerState opt(model.parameters(), config.adam);
  std::vector<Interaction> order = dataset.train();
  const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
  const auto start = std::chrono::steady_clock::now();
  int stale = 0;
  std::uint64_t batch_index = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::sort(order.begin(), order.end());
    Rng shuffle_rng = make_rng(config.seed, "shuffle", {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b, ++batch_index) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      std::span<const Interaction> positives(order.data() + lo, hi - lo);
      const auto batch = build_batch(dataset, model, positives, sampler, batch_index);
      loss_sum += batch_loss(batch, model, loss);
      const auto grads = batch_gradients(batch, model, loss);
      apply_sparse_gradients(model.mutable_parameters(), grads, opt);
      model.refresh();
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back({epoch, loss_sum / static_cast<double>(n_batches), elapsed});

    if (epoch % config.eval_every != 0) continue;
    auto val = evaluate(model, dataset, Split::val, config.top_k, exclusion_for(Split::val, true));
    val.epoch = epoch;
    result.curve.push_back(val);
    if (config.evaluate_test) {
      auto test = evaluate(model, dataset, Split::test, config.top_k,
                           exclusion_for(Split::test, config.exclude_val_from_test));
      test.epoch = epoch;
      result.curve.push_back(test);
    }
    if (val.recall > result.best_val_recall) {
      result.best_val_recall = val.recall;
      result.best_epoch = epoch;
      result.best_parameters = model.parameters();
      stale = 0;
    } else {
      ++stale;
    }
    if (on_eval && !on_eval(result)) break;
    if (config.early_stop_patience > 0 && stale >= config.early_stop_patience) break;
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const TrainResult& result, int k) {
  out << "epoch,split,recall_at_" << k << ",ndcg_at_" << k << ",mean_loss,elapsed_ms\n";
  auto prec = out.precision(10);
  for (const auto& r : result.curve) {
    const auto& e = result.epochs[static_cast<std::size_t>(r.epoch - 1)];
    out << r.epoch << ',' << to_string(r.split) << ',' << r.recall << ',' << r.ndcg << ',' << e.mean_loss << ','
        << e.elapsed_ms << '\n';
  }
  out.precision(prec);
}

}  // namespace hardrank
