#include "hardrank/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hardrank {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

EmbeddingTable init_embeddings(std::int32_t n_users, std::int32_t n_items, std::int32_t dim,
                               std::uint64_t seed) {
  if (n_users <= 0 || n_items <= 0 || dim <= 0) throw SpecError("embedding dimensions must be positive");
  std::normal_distribution<double> normal(0.0, 0.1);
  EmbeddingTable t{RowMatrix<double>(n_users, dim), RowMatrix<double>(n_items, dim)};
  Rng rng(seed);
  for (Eigen::Index k = 0; k < t.users.size(); ++k) t.users.data()[k] = normal(rng);
  for (Eigen::Index k = 0; k < t.items.size(); ++k) t.items.data()[k] = normal(rng);
  return t;
}

GraphPropagation::GraphPropagation(const InteractionDataset& dataset, int n_layers)
    : n_users_(dataset.n_users()), n_items_(dataset.n_items()), n_layers_(n_layers) {
  if (n_layers < 0) throw SpecError("n_layers must be nonnegative");
  std::vector<double> user_deg(n_users_, 0.0), item_deg(n_items_, 0.0);
  for (const auto& r : dataset.train()) {
    user_deg[r.user] += 1.0;
    item_deg[r.item] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(dataset.train().size() * 2);
  for (const auto& r : dataset.train()) {
    const double w = 1.0 / std::sqrt(user_deg[r.user] * item_deg[r.item]);
    entries.emplace_back(r.user, n_users_ + r.item, w);
    entries.emplace_back(n_users_ + r.item, r.user, w);
  }
  const Eigen::Index n = Eigen::Index(n_users_) + n_items_;
  adjacency_.resize(n, n);
  adjacency_.setFromTriplets(entries.begin(), entries.end());
  adjacency_t_ = adjacency_.transpose();
}

RowMatrix<double> GraphPropagation::run(const Adjacency& op, const RowMatrix<double>& stacked) const {
  RowMatrix<double> sum = stacked;
  RowMatrix<double> layer = stacked;
  for (int l = 0; l < n_layers_; ++l) {
    RowMatrix<double> next = op * layer;
    layer.swap(next);
    sum += layer;
  }
  if (n_layers_ > 0) sum /= static_cast<double>(n_layers_ + 1);
  return sum;
}

RowMatrix<double> GraphPropagation::apply(const RowMatrix<double>& stacked) const {
  return run(adjacency_, stacked);
}

RowMatrix<double> GraphPropagation::apply_transpose(const RowMatrix<double>& stacked) const {
  return run(adjacency_t_, stacked);
}

RowMatrix<double> stack(const EmbeddingTable& table) {
  RowMatrix<double> s(table.n_users() + table.n_items(), table.dim());
  s.topRows(table.n_users()) = table.users;
  s.bottomRows(table.n_items()) = table.items;
  return s;
}

EmbeddingTable unstack(const RowMatrix<double>& stacked, Eigen::Index n_users) {
  return {stacked.topRows(n_users), stacked.bottomRows(stacked.rows() - n_users)};
}

EmbeddingTable propagate(const EmbeddingTable& table, const GraphPropagation& graph) {
  return unstack(graph.apply(stack(table)), table.n_users());
}

EmbeddingTable propagate_transpose(const EmbeddingTable& table, const GraphPropagation& graph) {
  return unstack(graph.apply_transpose(stack(table)), table.n_users());
}

std::string to_string(ModelKind kind) { return kind == ModelKind::mf ? "mf" : "lightgcn"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "mf") return ModelKind::mf;
  if (name == "lightgcn") return ModelKind::lightgcn;
  throw SpecError("unknown model kind '" + name + "' (expected mf or lightgcn)");
}

ScoringModel::ScoringModel(ModelKind kind, EmbeddingTable params, std::shared_ptr<const GraphPropagation> graph)
    : kind_(kind), params_(std::move(params)), graph_(std::move(graph)) {
  refresh();
}

ScoringModel ScoringModel::matrix_factorization(EmbeddingTable params) {
  return ScoringModel(ModelKind::mf, std::move(params), nullptr);
}

ScoringModel ScoringModel::light_gcn(EmbeddingTable params, std::shared_ptr<const GraphPropagation> graph) {
  if (!graph) throw SpecError("light-GCN model requires a propagation graph");
  if (graph->n_users() != params.n_users() || graph->n_items() != params.n_items())
    throw SpecError("propagation graph and embedding table disagree on shape");
  return ScoringModel(ModelKind::lightgcn, std::move(params), std::move(graph));
}

void ScoringModel::refresh() {
  if (kind_ == ModelKind::lightgcn) view_ = propagate(params_, *graph_);
}

Eigen::VectorXd ScoringModel::score_all(UserIndex u) const {
  const auto& v = view();
  return v.items * v.users.row(u).transpose();
}

EmbeddingTable ScoringModel::pull_back(const EmbeddingTable& view_gradient) const {
  if (kind_ == ModelKind::mf) return view_gradient;
  return propagate_transpose(view_gradient, *graph_);
}

OptimizerState::OptimizerState(const EmbeddingTable& shape, AdamConfig config)
    : config_(config),
      m_users_(RowMatrix<double>::Zero(shape.n_users(), shape.dim())),
      v_users_(RowMatrix<double>::Zero(shape.n_users(), shape.dim())),
      m_items_(RowMatrix<double>::Zero(shape.n_items(), shape.dim())),
      v_items_(RowMatrix<double>::Zero(shape.n_items(), shape.dim())),
      user_steps_(static_cast<std::size_t>(shape.n_users()), 0),
      item_steps_(static_cast<std::size_t>(shape.n_items()), 0) {
  if (!(config.learning_rate > 0)) throw SpecError("learning rate must be positive");
}

void adam_step(OptimizerState& state, EmbeddingTable& table, std::span<const RowGradient> grads) {
  const auto& cfg = state.config_;
  for (const auto& g : grads) {
    const bool user = g.kind == RowKind::user;
    auto& m = user ? state.m_users_ : state.m_items_;
    auto& v = user ? state.v_users_ : state.v_items_;
    auto& steps = user ? state.user_steps_ : state.item_steps_;
    auto& params = user ? table.users : table.items;
    const std::int64_t t = ++steps[g.row];
    auto mr = m.row(g.row);
    auto vr = v.row(g.row);
    mr = cfg.beta1 * mr + (1.0 - cfg.beta1) * g.value.transpose();
    vr = cfg.beta2 * vr + (1.0 - cfg.beta2) * g.value.transpose().array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    params.row(g.row).array() -=
        cfg.learning_rate * (mr.array() / bc1) / ((vr.array() / bc2).sqrt() + cfg.epsilon);
  }
}

SparseGradient accumulate(std::span<const RowGradient> grads) {
  std::vector<std::size_t> order(grads.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::pair(grads[x].kind, grads[x].row) < std::pair(grads[y].kind, grads[y].row);
  });
  SparseGradient out;
  for (std::size_t k : order) {
    const auto& g = grads[k];
    if (!out.empty() && out.back().kind == g.kind && out.back().row == g.row)
      out.back().value += g.value;
    else
      out.push_back(g);
  }
  return out;
}

void apply_sparse_gradients(EmbeddingTable& table, std::span<const RowGradient> grads, OptimizerState& state) {
  if (grads.empty()) return;
  const auto merged = accumulate(grads);
  adam_step(state, table, merged);
#ifndef NDEBUG
  if (!table.all_finite()) throw Error("non-finite embedding after update");
#endif
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (ckpt.table.n_users() != h.n_users || ckpt.table.n_items() != h.n_items || ckpt.table.dim() != h.dim)
    throw SpecError("checkpoint header does not match table shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "hardrank-checkpoint 1 " << h.n_users << ' ' << h.n_items << ' ' << h.dim << ' ' << to_string(h.kind)
      << ' ' << h.seed << ' ' << h.n_layers << '\n';
  out.write(reinterpret_cast<const char*>(ckpt.table.users.data()),
            static_cast<std::streamsize>(ckpt.table.users.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(ckpt.table.items.data()),
            static_cast<std::streamsize>(ckpt.table.items.size() * sizeof(double)));
  if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  std::string magic, kind;
  int version = 0;
  Checkpoint ckpt;
  auto& h = ckpt.header;
  hs >> magic >> version >> h.n_users >> h.n_items >> h.dim >> kind >> h.seed >> h.n_layers;
  if (!hs || magic != "hardrank-checkpoint" || version != 1) throw ParseError(1, "not a hardrank checkpoint");
  h.kind = parse_model_kind(kind);
  ckpt.table.users.resize(h.n_users, h.dim);
  ckpt.table.items.resize(h.n_items, h.dim);
  in.read(reinterpret_cast<char*>(ckpt.table.users.data()),
          static_cast<std::streamsize>(ckpt.table.users.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(ckpt.table.items.data()),
          static_cast<std::streamsize>(ckpt.table.items.size() * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint " + path.string());
  return ckpt;
}

}  // namespace hardrank
