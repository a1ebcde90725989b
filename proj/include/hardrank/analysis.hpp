#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hardrank/data.hpp"
#include "hardrank/model.hpp"
#include "hardrank/prefcurve.hpp"

namespace hardrank {

enum class NegativeLabel : std::uint8_t { true_negative, false_negative };

struct ScoreSample {
  NegativeLabel label;
  UserIndex user;
  ItemIndex item;
  double score;
};

struct CollectOptions {
  int true_negatives_per_user = 200;  // 0 keeps every true negative
  std::uint64_t seed = 0;
};

/// Scores of false negatives (given pairs: test items, or planted false
/// negatives on synthetic data) and of true negatives, the items outside
/// every positive set and outside the false-negative list of the user.
std::vector<ScoreSample> collect_scores(const ScoringModel& model, const InteractionDataset& dataset,
                                        std::span<const UserIndex> users,
                                        std::span<const Interaction> false_negatives,
                                        const CollectOptions& options = {});

/// Gaussian KDE with Silverman bandwidth, tabulated on a uniform grid over
/// [min - 3h, max + 3h]. Keeps the (sorted) samples so it can be evaluated
/// anywhere.
class DensityEstimate {
 public:
  DensityEstimate(std::vector<double> samples, int grid_size);

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& density() const noexcept { return density_; }
  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t sample_count() const noexcept { return samples_.size(); }
  double operator()(double x) const;

 private:
  std::vector<double> samples_;
  double bandwidth_;
  std::vector<double> grid_;
  std::vector<double> density_;
};

DensityEstimate kde(std::span<const double> samples, int grid_size = 512);

/// Trapezoidal integral of tabulated values over a grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Discrete KL(p || q) in nats on a shared uniform grid spanning both
/// supports; densities floored at 1e-12 and renormalized on the grid.
double kl_divergence(const DensityEstimate& p, const DensityEstimate& q);

struct CurvePoint {
  double x;
  double delta_g;
  double delta_g_over_c;
  double g;
  double neg_log_g;
};

/// `steps` evenly spaced points over [x_min, x_max].
std::vector<CurvePoint> delta_curve_sweep(const PreferenceCurve<double>& curve, double x_min, double x_max,
                                          int steps);
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

struct FalseNegativeReport {
  std::vector<ScoreSample> samples;
  DensityEstimate true_negative;
  DensityEstimate false_negative;
  double kl = 0.0;  // KL(true negative || false negative)
};

FalseNegativeReport analyze_false_negatives(const ScoringModel& model, const InteractionDataset& dataset,
                                            std::span<const Interaction> false_negatives,
                                            const CollectOptions& options = {}, int grid_size = 512);

void write_samples_csv(std::ostream& out, std::span<const ScoreSample> samples);
/// `x,density_tn,density_fn` over the shared grid.
void write_density_csv(std::ostream& out, const DensityEstimate& tn, const DensityEstimate& fn);

}  // namespace hardrank
