#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bpm/activation_store.hpp"
#include "bpm/domain.hpp"
#include "bpm/error.hpp"
#include "bpm/stimulus.hpp"

namespace bpm {

/// Dense row-major matrix of doubles; rows are stimuli, columns units.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_container(const ActivationContainer& c);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(data_).subspan(r * cols_, cols_); }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct UnitMask {
  std::vector<bool> active;
  double threshold = 0.0;

  std::size_t count() const;
};

struct MetricResult {
  PropertyId property{};
  double effect = 0.0;
  std::size_t n_groups = 0;      // groups (or displays, pairs, stimuli) that contributed
  std::size_t n_skipped = 0;     // degenerate groups left out of the average
  std::size_t n_units_used = 0;  // units entering unit-wise metrics; 0 for distance metrics
  std::vector<double> per_group;
};

/// A unit is active when its maximum response and its standard deviation
/// across the given rows both exceed `threshold`. All rows when `rows` is empty.
UnitMask detect_active_units(const Matrix& acts, double threshold, std::span<const std::size_t> rows = {});

double neural_distance(std::span<const double> x, std::span<const double> y, DistanceMetric metric);

/// Sample Pearson correlation, clamped to [-1, 1]. Throws ZeroVariance.
double pearson(std::span<const double> x, std::span<const double> y);

/// (a - b) / (a + b) for nonnegative a, b not both zero.
double modulation_index(double a, double b);

/// Distances for one group of a modulation-index property, ordered so that
/// the index is (plus - minus) / (plus + minus).
struct DistancePair {
  double plus = 0.0;
  double minus = 0.0;
};

/// Mean per-group modulation index. Groups with plus + minus == 0 are
/// skipped and counted; throws AllGroupsDegenerate when none remain.
MetricResult mean_modulation_index(PropertyId property, std::span<const DistancePair> groups);

// Per-property distance extraction; each returns the pair in index order.
DistancePair mirror_distances(std::span<const double> original, std::span<const double> vflip,
                              std::span<const double> hflip, DistanceMetric m);  // {D_h, D_v}
DistancePair occlusion_distances(std::span<const double> unoccluded, std::span<const double> occluded,
                                 std::span<const double> control, DistanceMetric m);  // {d2, d1}
DistancePair relative_size_distances(std::span<const double> base, std::span<const double> proportional,
                                     std::span<const double> disproportional, DistanceMetric m);  // {d2, d1}
DistancePair surface_distances(std::span<const double> base, std::span<const double> congruent,
                               std::span<const double> incongruent, DistanceMetric m);  // {d2, d1}
DistancePair three_d_distances(std::span<const double> base_3d, std::span<const double> changed_3d,
                               std::span<const double> base_2d, std::span<const double> changed_2d,
                               DistanceMetric m);  // {d1, d2}
DistancePair global_distances(std::span<const double> reference, std::span<const double> global_change,
                              std::span<const double> local_change, DistanceMetric m);  // {d_g, d_l}
DistancePair thatcher_distances(std::span<const double> upright, std::span<const double> upright_thatcher,
                                std::span<const double> inverted, std::span<const double> inverted_thatcher,
                                DistanceMetric m);  // {d_u, d_i}

struct MirrorGroup {
  std::span<const double> original, vflip, hflip;
};
MetricResult mirror_confusion(std::span<const MirrorGroup> groups, DistanceMetric m);

/// One multi-object display and the rows of its constituent single displays.
struct MultiDisplay {
  std::size_t multi_row = 0;
  std::vector<std::size_t> single_rows;
};

/// Mean over active units of the zero-intercept slope of the multi-object
/// response on the summed single-object responses.
MetricResult normalization_slope(PropertyId property, const Matrix& acts, std::span<const MultiDisplay> displays,
                                 const UnitMask& mask);

/// Selectivity (1 - a) / (1 - 1/n), a = mean(r)^2 / mean(r^2), responses
/// rectified at zero. 0 for an all-zero response vector.
double sparseness(std::span<const double> responses);

/// Correlation across active units between each unit's sparseness over rows_a
/// and over rows_b.
MetricResult correlated_sparseness(PropertyId property, const Matrix& acts, std::span<const std::size_t> rows_a,
                                   std::span<const std::size_t> rows_b, const UnitMask& mask);

/// pearson(d, g) - pearson(d, a) over all unordered stimulus pairs, where
/// a = |l_i - l_j| and g = |l_i - l_j| / (l_i + l_j).
double weber_from_distances(std::span<const double> pair_distances, std::span<const double> lengths);
MetricResult weber_effect(const Matrix& acts, std::span<const std::size_t> rows, std::span<const double> lengths,
                          DistanceMetric m);

double scene_incongruence_index(double acc_congruent, double acc_incongruent);
struct ClassTrial {
  std::span<const double> probabilities;
  int label = 0;
};
double top1_accuracy(std::span<const ClassTrial> trials);
MetricResult scene_incongruence(std::span<const ClassTrial> congruent, std::span<const ClassTrial> incongruent);

/// Computes one property's effect from a container aligned to its stimulus set.
MetricResult compute_property(PropertyId property, const ActivationContainer& c, const StimulusSet& s,
                              const ScoringConfig& cfg);

/// Same, on an already aligned response matrix (rows indexed through `a`).
MetricResult compute_property(PropertyId property, const Matrix& acts, const Alignment& a, const StimulusSet& s,
                              const ScoringConfig& cfg, const std::map<int, std::string>& label_map = {});

struct PropertyInput {
  ActivationContainer container;
  StimulusSet stimuli;
};

struct PropertyFailure {
  PropertyId property;
  ErrorCode code;
  std::string message;
};

struct EffectComputation {
  EffectVector vector;
  std::map<PropertyId, MetricResult> results;
  std::vector<PropertyFailure> failures;
};

/// Computes every property in cfg.property_subset. A property that fails
/// (including one with no input) is left missing and reported in `failures`;
/// properties outside the subset are missing without a failure.
EffectComputation compute_effect_vector(const std::string& model_id, const std::optional<std::string>& layer_tag,
                                        const std::map<PropertyId, const PropertyInput*>& inputs,
                                        const ScoringConfig& cfg);

}  // namespace bpm
