#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "hardrank/common.hpp"
#include "hardrank/data.hpp"

namespace hardrank {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// User and item embeddings, one row per entity.
template <typename Scalar>
struct BasicEmbeddingTable {
  RowMatrix<Scalar> users;
  RowMatrix<Scalar> items;

  Eigen::Index dim() const noexcept { return users.cols(); }
  Eigen::Index n_users() const noexcept { return users.rows(); }
  Eigen::Index n_items() const noexcept { return items.rows(); }

  bool all_finite() const { return users.allFinite() && items.allFinite(); }

  friend bool operator==(const BasicEmbeddingTable& x, const BasicEmbeddingTable& y) {
    return x.users.rows() == y.users.rows() && x.items.rows() == y.items.rows() &&
           x.users.cols() == y.users.cols() && x.users == y.users && x.items == y.items;
  }
};

using EmbeddingTable = BasicEmbeddingTable<double>;

/// Entries i.i.d. N(0, 0.1^2) from the given seed.
EmbeddingTable init_embeddings(std::int32_t n_users, std::int32_t n_items, std::int32_t dim,
                               std::uint64_t seed);

template <typename Scalar>
Scalar score_mf(const BasicEmbeddingTable<Scalar>& table, UserIndex u, ItemIndex i) {
  return table.users.row(u).dot(table.items.row(i));
}

/// Light graph convolution over the train bipartite graph. Nodes are stacked
/// users first, then items; each edge weight is 1/sqrt(deg(u) deg(i)), no
/// self-loops. The output is the mean of layers 0..n_layers.
class GraphPropagation {
 public:
  using Adjacency = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  GraphPropagation(const InteractionDataset& dataset, int n_layers);

  const Adjacency& adjacency() const noexcept { return adjacency_; }
  int n_layers() const noexcept { return n_layers_; }
  std::int32_t n_users() const noexcept { return n_users_; }
  std::int32_t n_items() const noexcept { return n_items_; }

  /// Layer-averaged propagation P = (1/(L+1)) sum_l A^l of a stacked matrix.
  RowMatrix<double> apply(const RowMatrix<double>& stacked) const;
  /// P^T applied to a stacked matrix (pulls gradients back to the inputs).
  RowMatrix<double> apply_transpose(const RowMatrix<double>& stacked) const;

 private:
  RowMatrix<double> run(const Adjacency& op, const RowMatrix<double>& stacked) const;

  std::int32_t n_users_;
  std::int32_t n_items_;
  int n_layers_;
  Adjacency adjacency_;
  Adjacency adjacency_t_;
};

RowMatrix<double> stack(const EmbeddingTable& table);
EmbeddingTable unstack(const RowMatrix<double>& stacked, Eigen::Index n_users);

EmbeddingTable propagate(const EmbeddingTable& table, const GraphPropagation& graph);
EmbeddingTable propagate_transpose(const EmbeddingTable& table, const GraphPropagation& graph);

enum class ModelKind : std::uint8_t { mf, lightgcn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// A learnable scoring function f(i | u). For MF the scoring view is the
/// parameter table itself; for light-GCN it is the propagated table, which
/// refresh() recomputes after parameter updates.
class ScoringModel {
 public:
  static ScoringModel matrix_factorization(EmbeddingTable params);
  static ScoringModel light_gcn(EmbeddingTable params, std::shared_ptr<const GraphPropagation> graph);

  ModelKind kind() const noexcept { return kind_; }
  const EmbeddingTable& parameters() const noexcept { return params_; }
  EmbeddingTable& mutable_parameters() noexcept { return params_; }
  const EmbeddingTable& view() const noexcept { return kind_ == ModelKind::mf ? params_ : view_; }
  const GraphPropagation* graph() const noexcept { return graph_.get(); }

  void refresh();

  double score(UserIndex u, ItemIndex i) const { return score_mf(view(), u, i); }
  /// Scores of every item for u.
  Eigen::VectorXd score_all(UserIndex u) const;

  /// Gradient w.r.t. the scoring view -> gradient w.r.t. parameters.
  EmbeddingTable pull_back(const EmbeddingTable& view_gradient) const;

 private:
  ScoringModel(ModelKind kind, EmbeddingTable params, std::shared_ptr<const GraphPropagation> graph);

  ModelKind kind_;
  EmbeddingTable params_;
  EmbeddingTable view_;
  std::shared_ptr<const GraphPropagation> graph_;
};

enum class RowKind : std::uint8_t { user, item };

struct RowGradient {
  RowKind kind;
  std::int32_t row;
  Eigen::VectorXd value;
};

using SparseGradient = std::vector<RowGradient>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Lazy Adam state: moments and step counts are kept per embedding row and
/// only advance for rows that receive a gradient.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const EmbeddingTable& shape, AdamConfig config);

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t steps(RowKind kind, std::int32_t row) const {
    return kind == RowKind::user ? user_steps_[row] : item_steps_[row];
  }
  const RowMatrix<double>& first_moment(RowKind kind) const { return kind == RowKind::user ? m_users_ : m_items_; }
  const RowMatrix<double>& second_moment(RowKind kind) const { return kind == RowKind::user ? v_users_ : v_items_; }

 private:
  friend void adam_step(OptimizerState&, EmbeddingTable&, std::span<const RowGradient>);

  AdamConfig config_;
  RowMatrix<double> m_users_, v_users_, m_items_, v_items_;
  std::vector<std::int64_t> user_steps_, item_steps_;
};

/// One bias-corrected Adam update per listed row. Rows must be distinct.
void adam_step(OptimizerState& state, EmbeddingTable& table, std::span<const RowGradient> grads);

/// Sums gradients that target the same row, then applies adam_step once per
/// touched row in (kind, row) order.
void apply_sparse_gradients(EmbeddingTable& table, std::span<const RowGradient> grads, OptimizerState& state);

/// Sums duplicate rows; output sorted by (kind, row).
SparseGradient accumulate(std::span<const RowGradient> grads);

struct CheckpointHeader {
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  std::int32_t dim = 0;
  ModelKind kind = ModelKind::mf;
  std::uint64_t seed = 0;
  int n_layers = 0;

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

struct Checkpoint {
  CheckpointHeader header;
  EmbeddingTable table;
};

/// One ASCII header line followed by the user then item matrices as
/// row-major little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hardrank
