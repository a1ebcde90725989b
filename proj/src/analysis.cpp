#include "hardrank/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

namespace hardrank {

namespace {

constexpr double kDensityFloor = 1e-12;
constexpr double kKernelCutoff = 9.0;  // kernel support in bandwidths

std::vector<double> uniform_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (int k = 0; k < n; ++k) g[k] = lo + step * k;
  g.back() = hi;
  return g;
}

}  // namespace

std::vector<ScoreSample> collect_scores(const ScoringModel& model, const InteractionDataset& dataset,
                                        std::span<const UserIndex> users,
                                        std::span<const Interaction> false_negatives,
                                        const CollectOptions& options) {
  std::vector<std::vector<ItemIndex>> fn_by_user(static_cast<std::size_t>(dataset.n_users()));
  for (const auto& r : false_negatives) fn_by_user[r.user].push_back(r.item);
  for (auto& v : fn_by_user) std::sort(v.begin(), v.end());

  std::vector<ScoreSample> out;
  for (UserIndex u : users) {
    const auto& fns = fn_by_user[u];
    const Eigen::VectorXd scores = model.score_all(u);
    for (ItemIndex i : fns) out.push_back({NegativeLabel::false_negative, u, i, scores[i]});

    auto is_excluded = [&](ItemIndex i) {
      return dataset.is_known_positive(u, i) ||
             std::binary_search(dataset.test_items(u).begin(), dataset.test_items(u).end(), i) ||
             std::binary_search(fns.begin(), fns.end(), i);
    };
    std::vector<ItemIndex> tn;
    for (ItemIndex i = 0; i < dataset.n_items(); ++i)
      if (!is_excluded(i)) tn.push_back(i);
    const int limit = options.true_negatives_per_user;
    if (limit > 0 && tn.size() > static_cast<std::size_t>(limit)) {
      Rng rng = make_rng(options.seed, "analysis.true_negatives", {static_cast<std::uint64_t>(u)});
      std::vector<ItemIndex> picked;
      std::sample(tn.begin(), tn.end(), std::back_inserter(picked), limit, rng);
      tn.swap(picked);
    }
    for (ItemIndex i : tn) out.push_back({NegativeLabel::true_negative, u, i, scores[i]});
  }
  return out;
}

DensityEstimate::DensityEstimate(std::vector<double> samples, int grid_size) : samples_(std::move(samples)) {
  const auto n = static_cast<double>(samples_.size());
  if (samples_.size() < 2) throw DegenerateSample("kde needs at least two samples");
  if (grid_size < 2) throw SpecError("kde grid needs at least two points");
  const double mean = std::accumulate(samples_.begin(), samples_.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples_) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DegenerateSample("kde samples have zero variance");
  bandwidth_ = 1.06 * sd * std::pow(n, -0.2);
  std::sort(samples_.begin(), samples_.end());
  grid_ = uniform_grid(samples_.front() - 3.0 * bandwidth_, samples_.back() + 3.0 * bandwidth_, grid_size);
  density_.reserve(grid_.size());
  for (double x : grid_) density_.push_back((*this)(x));
}

double DensityEstimate::operator()(double x) const {
  const double h = bandwidth_;
  auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - kKernelCutoff * h);
  auto hi = std::upper_bound(lo, samples_.end(), x + kKernelCutoff * h);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum / (static_cast<double>(samples_.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

DensityEstimate kde(std::span<const double> samples, int grid_size) {
  return DensityEstimate(std::vector<double>(samples.begin(), samples.end()), grid_size);
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
  return s;
}

double kl_divergence(const DensityEstimate& p, const DensityEstimate& q) {
  const double lo = std::min(p.grid().front(), q.grid().front());
  const double hi = std::max(p.grid().back(), q.grid().back());
  const int n = static_cast<int>(std::max(p.grid().size(), q.grid().size()));
  const auto grid = uniform_grid(lo, hi, n);
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> pv(grid.size()), qv(grid.size());
  double ps = 0.0, qs = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    pv[k] = std::max(p(grid[k]), kDensityFloor);
    qv[k] = std::max(q(grid[k]), kDensityFloor);
    ps += pv[k] * dx;
    qs += qv[k] * dx;
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double pk = pv[k] / ps, qk = qv[k] / qs;
    kl += pk * std::log(pk / qk) * dx;
  }
  return std::max(kl, 0.0);
}

std::vector<CurvePoint> delta_curve_sweep(const PreferenceCurve<double>& curve, double x_min, double x_max,
                                          int steps) {
  if (steps < 2) throw SpecError("curve sweep needs at least two steps");
  if (!(x_max > x_min)) throw SpecError("curve sweep needs x_max > x_min");
  std::vector<CurvePoint> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (double x : uniform_grid(x_min, x_max, steps)) {
    const double d = delta_g(curve, x);
    out.push_back({x, d, d / curve.c(), g(curve, x), neg_log_g(curve, x)});
  }
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  auto prec = out.precision(17);
  out << "x,delta_g,delta_g_over_c,g,neg_log_g\n";
  for (const auto& p : points)
    out << p.x << ',' << p.delta_g << ',' << p.delta_g_over_c << ',' << p.g << ',' << p.neg_log_g << '\n';
  out.precision(prec);
}

FalseNegativeReport analyze_false_negatives(const ScoringModel& model, const InteractionDataset& dataset,
                                            std::span<const Interaction> false_negatives,
                                            const CollectOptions& options, int grid_size) {
  std::vector<UserIndex> users(static_cast<std::size_t>(dataset.n_users()));
  std::iota(users.begin(), users.end(), 0);
  auto samples = collect_scores(model, dataset, users, false_negatives, options);
  std::vector<double> tn, fn;
  for (const auto& s : samples) (s.label == NegativeLabel::true_negative ? tn : fn).push_back(s.score);
  DensityEstimate ptn(std::move(tn), grid_size);
  DensityEstimate pfn(std::move(fn), grid_size);
  const double kl = kl_divergence(ptn, pfn);
  return {std::move(samples), std::move(ptn), std::move(pfn), kl};
}

void write_samples_csv(std::ostream& out, std::span<const ScoreSample> samples) {
  auto prec = out.precision(17);
  out << "label,score\n";
  for (const auto& s : samples)
    out << (s.label == NegativeLabel::true_negative ? "true_negative" : "false_negative") << ',' << s.score << '\n';
  out.precision(prec);
}

void write_density_csv(std::ostream& out, const DensityEstimate& tn, const DensityEstimate& fn) {
  const double lo = std::min(tn.grid().front(), fn.grid().front());
  const double hi = std::max(tn.grid().back(), fn.grid().back());
  const int n = static_cast<int>(std::max(tn.grid().size(), fn.grid().size()));
  auto prec = out.precision(17);
  out << "x,density_tn,density_fn\n";
  for (double x : uniform_grid(lo, hi, n)) out << x << ',' << tn(x) << ',' << fn(x) << '\n';
  out.precision(prec);
}

}  // namespace hardrank
